#include "gridvqa/balance.hpp"

#include <algorithm>
#include <numeric>

#include "gridvqa/io.hpp"
#include "gridvqa/parallel.hpp"

namespace gridvqa {

namespace {

constexpr std::string_view kComparison = "comparison";

bool is_comparison_bucket(std::string_view bucket)
{
    return bucket == kComparison || bucket.starts_with("comparison/");
}

const std::string& single_answer(const QaRecord& r)
{
    if (r.answers.size() != 1)
        throw Error("question " + r.question_id + " (" + r.qtype + ") must have exactly one answer");
    return r.answers.front();
}

} // namespace

BalanceGroup balance_group(const QaRecord& r, const BalanceOptions& options)
{
    if (r.qtype == "presence") {
        if (!r.class_a)
            throw Error("presence question " + r.question_id + " has no class_a");
        return {"presence", *r.class_a + "/" + single_answer(r)};
    }
    if (r.qtype == "area")
        return {"area", single_answer(r)};
    if (r.qtype == "comparison") {
        std::string bucket(kComparison);
        if (options.per_subtype_comparison)
            bucket += "/" + r.subtype;
        return {std::move(bucket), single_answer(r)};
    }
    if (r.qtype == "landcover")
        return {"landcover", "*"};
    throw Error("unknown question type \"" + r.qtype + "\"");
}

std::uint64_t balance_rank(std::uint64_t seed, std::string_view question_id)
{
    return derive_seed(seed, "balance", question_id);
}

// ---------------------------------------------------------------------------

void AnswerHistogram::merge(const AnswerHistogram& other)
{
    for (const auto& [bucket, labels] : other.counts)
        for (const auto& [label, n] : labels)
            counts[bucket][label] += n;
}

std::uint64_t AnswerHistogram::count(const std::string& bucket, const std::string& label) const
{
    auto b = counts.find(bucket);
    if (b == counts.end())
        return 0;
    auto l = b->second.find(label);
    return l == b->second.end() ? 0 : l->second;
}

std::uint64_t AnswerHistogram::bucket_total(const std::string& bucket) const
{
    auto b = counts.find(bucket);
    if (b == counts.end())
        return 0;
    std::uint64_t n = 0;
    for (const auto& [label, c] : b->second)
        n += c;
    return n;
}

AnswerHistogram answer_histogram(std::span<const QaRecord> records, const BalanceOptions& options)
{
    AnswerHistogram h;
    for (const auto& r : records)
        h.add(balance_group(r, options));
    return h;
}

std::uint64_t lower_median(std::vector<std::uint64_t> counts)
{
    std::erase(counts, 0);
    if (counts.empty())
        return 0;
    const std::size_t mid = (counts.size() - 1) / 2;
    std::nth_element(counts.begin(), counts.begin() + static_cast<std::ptrdiff_t>(mid), counts.end());
    return counts[mid];
}

std::uint64_t BalanceCaps::cap(const std::string& bucket, const std::string& label) const
{
    auto b = caps.find(bucket);
    if (b == caps.end())
        return kUncapped;
    auto l = b->second.find(label);
    return l == b->second.end() ? kUncapped : l->second;
}

// ---------------------------------------------------------------------------
// Rules

void presence_caps(const AnswerHistogram& hist, BalanceCaps& out)
{
    auto it = hist.counts.find("presence");
    if (it == hist.counts.end())
        return;
    std::map<std::string, std::pair<std::uint64_t, std::uint64_t>> per_class;  // yes, no
    for (const auto& [label, n] : it->second) {
        const auto slash = label.rfind('/');
        const std::string cls = label.substr(0, slash);
        const std::string answer = label.substr(slash + 1);
        if (answer == "yes")
            per_class[cls].first += n;
        else if (answer == "no")
            per_class[cls].second += n;
        else
            throw Error("presence answer must be yes or no, got \"" + answer + "\"");
    }
    auto& caps = out.caps["presence"];
    for (const auto& [cls, yn] : per_class) {
        const auto m = std::min(yn.first, yn.second);
        caps[cls + "/yes"] = m;
        caps[cls + "/no"] = m;
    }
}

bool is_area_endpoint(std::string_view label)
{
    return label.find('-') == std::string_view::npos;
}

void area_caps(const AnswerHistogram& hist, BalanceCaps& out)
{
    auto it = hist.counts.find("area");
    if (it == hist.counts.end())
        return;
    std::vector<std::uint64_t> middle;
    for (const auto& [label, n] : it->second)
        if (!is_area_endpoint(label))
            middle.push_back(n);
    const auto m = lower_median(std::move(middle));
    auto& caps = out.caps["area"];
    for (const auto& [label, n] : it->second)
        if (is_area_endpoint(label))
            caps[label] = m;
}

void comparison_caps(const AnswerHistogram& hist, BalanceCaps& out)
{
    for (const auto& [bucket, labels] : hist.counts) {
        if (!is_comparison_bucket(bucket))
            continue;
        std::vector<std::uint64_t> all;
        for (const auto& [label, n] : labels)
            all.push_back(n);
        const auto m = lower_median(std::move(all));
        auto& caps = out.caps[bucket];
        for (const auto& [label, n] : labels)
            caps[label] = m;
    }
}

BalanceCaps balance_caps(const AnswerHistogram& hist)
{
    BalanceCaps caps;
    presence_caps(hist, caps);
    area_caps(hist, caps);
    comparison_caps(hist, caps);
    return caps;
}

// ---------------------------------------------------------------------------
// Selection

std::uint32_t GroupTable::intern(const BalanceGroup& g)
{
    std::string key = g.bucket;
    key += '\x1f';
    key += g.label;
    auto [it, inserted] = index_.try_emplace(std::move(key), static_cast<std::uint32_t>(groups_.size()));
    if (inserted)
        groups_.push_back(g);
    return it->second;
}

std::vector<bool> select_kept(std::span<const BalanceEntry> entries, const GroupTable& groups,
                              const BalanceCaps& caps)
{
    std::vector<std::uint64_t> cap(groups.size());
    std::vector<std::uint64_t> count(groups.size(), 0);
    for (std::size_t g = 0; g < groups.size(); ++g)
        cap[g] = caps.cap(groups.group(static_cast<std::uint32_t>(g)).bucket,
                          groups.group(static_cast<std::uint32_t>(g)).label);
    for (const auto& e : entries)
        ++count[e.group];

    std::vector<bool> kept(entries.size(), true);
    // Bucket the positions of every over-cap group, then keep the `cap`
    // smallest (rank, position) within each.
    std::vector<std::vector<std::size_t>> members(groups.size());
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto g = entries[i].group;
        if (count[g] > cap[g])
            members[g].push_back(i);
    }
    for (std::size_t g = 0; g < groups.size(); ++g) {
        auto& m = members[g];
        if (m.empty())
            continue;
        auto less = [&](std::size_t a, std::size_t b) {
            return std::pair(entries[a].rank, a) < std::pair(entries[b].rank, b);
        };
        const auto keep = static_cast<std::ptrdiff_t>(cap[g]);
        std::nth_element(m.begin(), m.begin() + keep, m.end(), less);
        for (auto it = m.begin() + keep; it != m.end(); ++it)
            kept[*it] = false;
    }
    return kept;
}

nlohmann::json BalanceAudit::to_json() const
{
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [bucket, labels] : buckets)
        for (const auto& [label, c] : labels)
            j[bucket][label] = {{"before", c.before}, {"after", c.after}};
    return j;
}

// ---------------------------------------------------------------------------

namespace {

struct Prepared {
    GroupTable groups;
    std::vector<BalanceEntry> entries;
    AnswerHistogram hist;
};

void absorb_groups(Prepared& p, std::span<const BalanceGroup> groups, std::span<const std::uint64_t> ranks)
{
    for (std::size_t i = 0; i < groups.size(); ++i) {
        p.entries.push_back({p.groups.intern(groups[i]), ranks[i]});
        p.hist.add(groups[i]);
    }
}

Prepared prepare(std::span<const QaRecord> records, const BalanceOptions& options, int workers)
{
    std::vector<BalanceGroup> groups(records.size());
    std::vector<std::uint64_t> ranks(records.size());
    parallel_for(records.size(), workers, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            groups[i] = balance_group(records[i], options);
            ranks[i] = balance_rank(options.seed, records[i].question_id);
        }
    });
    Prepared p;
    p.entries.reserve(records.size());
    absorb_groups(p, groups, ranks);
    return p;
}

BalanceAudit make_audit(const Prepared& p, const std::vector<bool>& kept)
{
    BalanceAudit audit;
    for (std::size_t i = 0; i < p.entries.size(); ++i) {
        const auto& g = p.groups.group(p.entries[i].group);
        auto& c = audit.buckets[g.bucket][g.label];
        ++c.before;
        c.after += kept[i] ? 1 : 0;
    }
    return audit;
}

std::vector<QaRecord> apply_rule(std::span<const QaRecord> records, const AnswerHistogram& hist,
                                 std::uint64_t seed, const BalanceOptions& base,
                                 bool (*in_bucket)(std::string_view),
                                 void (*rule)(const AnswerHistogram&, BalanceCaps&))
{
    BalanceOptions options = base;
    options.seed = seed;
    BalanceCaps caps;
    rule(hist, caps);

    std::vector<QaRecord> subset;
    for (const auto& r : records)
        if (in_bucket(balance_group(r, options).bucket))
            subset.push_back(r);
    Prepared p = prepare(subset, options, 1);
    const auto kept = select_kept(p.entries, p.groups, caps);
    std::vector<QaRecord> out;
    for (std::size_t i = 0; i < subset.size(); ++i)
        if (kept[i])
            out.push_back(std::move(subset[i]));
    return out;
}

} // namespace

std::vector<QaRecord> balance_presence(std::span<const QaRecord> records, const AnswerHistogram& hist,
                                       std::uint64_t seed)
{
    return apply_rule(records, hist, seed, {}, [](std::string_view b) { return b == "presence"; },
                      presence_caps);
}

std::vector<QaRecord> balance_area(std::span<const QaRecord> records, const AnswerHistogram& hist,
                                   std::uint64_t seed)
{
    return apply_rule(records, hist, seed, {}, [](std::string_view b) { return b == "area"; }, area_caps);
}

std::vector<QaRecord> balance_comparison(std::span<const QaRecord> records, const AnswerHistogram& hist,
                                         std::uint64_t seed)
{
    // The histogram decides the pooling: per-subtype buckets when it has them.
    BalanceOptions options;
    options.per_subtype_comparison = !hist.counts.contains(std::string(kComparison)) &&
                                     std::any_of(hist.counts.begin(), hist.counts.end(),
                                                 [](const auto& kv) { return is_comparison_bucket(kv.first); });
    return apply_rule(records, hist, seed, options, is_comparison_bucket, comparison_caps);
}

BalanceResult balance_dataset(std::span<const QaRecord> records, const BalanceOptions& options, int workers)
{
    Prepared p = prepare(records, options, workers);
    const auto caps = balance_caps(p.hist);
    const auto kept = select_kept(p.entries, p.groups, caps);
    BalanceResult result;
    result.audit = make_audit(p, kept);
    for (std::size_t i = 0; i < records.size(); ++i)
        if (kept[i])
            result.kept.push_back(records[i]);
    return result;
}

BalanceAudit balance_file(const std::filesystem::path& in, const std::filesystem::path& out,
                          const BalanceOptions& options, int workers)
{
    constexpr std::size_t kBatch = 16384;
    Prepared p;

    // Pass 1: groups and ranks only; lines are parsed in parallel batches.
    {
        JsonlReader reader(in);
        std::vector<std::string> lines;
        std::vector<std::size_t> line_numbers;
        std::vector<BalanceGroup> groups;
        std::vector<std::uint64_t> ranks;
        bool more = true;
        while (more) {
            lines.clear();
            line_numbers.clear();
            std::string line;
            while (lines.size() < kBatch && (more = reader.next_line(line))) {
                lines.push_back(std::move(line));
                line_numbers.push_back(reader.line_number());
            }
            groups.assign(lines.size(), {});
            ranks.assign(lines.size(), 0);
            parallel_for(lines.size(), workers, [&](std::size_t begin, std::size_t end) {
                for (std::size_t i = begin; i < end; ++i) {
                    try {
                        const QaRecord r = qa_record_from_json(nlohmann::json::parse(lines[i]));
                        groups[i] = balance_group(r, options);
                        ranks[i] = balance_rank(options.seed, r.question_id);
                    } catch (const std::exception& e) {
                        throw Error(in.string() + ": line " + std::to_string(line_numbers[i]) + ": " + e.what());
                    }
                }
            });
            absorb_groups(p, groups, ranks);
        }
    }

    const auto caps = balance_caps(p.hist);
    const auto kept = select_kept(p.entries, p.groups, caps);

    // Pass 2: copy kept lines.
    {
        JsonlReader reader(in);
        AtomicWriter writer(out);
        std::string line;
        std::size_t i = 0;
        while (reader.next_line(line)) {
            if (i >= kept.size())
                throw Error(in.string() + " changed between balancing passes");
            if (kept[i])
                writer.write_line(line);
            ++i;
        }
        if (i != kept.size())
            throw Error(in.string() + " changed between balancing passes");
        writer.commit();
    }
    return make_audit(p, kept);
}

} // namespace gridvqa
