#include "gridvqa/io.hpp"

#include <sstream>
#include <unistd.h>

namespace gridvqa {

using nlohmann::json;

namespace {

std::optional<std::string> read_optional_string(const json& j, const char* key)
{
    if (!j.contains(key) || j.at(key).is_null())
        return std::nullopt;
    return j.at(key).get<std::string>();
}

std::string read_string(const json& j, const char* key)
{
    if (!j.contains(key))
        throw Error(std::string("missing field \"") + key + "\"");
    const auto& v = j.at(key);
    if (!v.is_string())
        throw Error(std::string("field \"") + key + "\" must be a string");
    return v.get<std::string>();
}

std::vector<std::string> read_string_array(const json& j, const char* key)
{
    if (!j.contains(key))
        throw Error(std::string("missing field \"") + key + "\"");
    const auto& v = j.at(key);
    if (!v.is_array())
        throw Error(std::string("field \"") + key + "\" must be an array of strings");
    std::vector<std::string> out;
    out.reserve(v.size());
    for (const auto& e : v) {
        if (!e.is_string())
            throw Error(std::string("field \"") + key + "\" must be an array of strings");
        out.push_back(e.get<std::string>());
    }
    return out;
}

} // namespace

nlohmann::ordered_json to_json(const QaRecord& r)
{
    using oj = nlohmann::ordered_json;
    return oj{
        {"schema_version", kSchemaVersion},
        {"question_id", r.question_id},
        {"image_id", r.image_id},
        {"split", r.split},
        {"qtype", r.qtype},
        {"subtype", r.subtype.empty() ? oj(nullptr) : oj(r.subtype)},
        {"template_id", r.template_id},
        {"question", r.question},
        {"class_a", r.class_a ? oj(*r.class_a) : oj(nullptr)},
        {"class_b", r.class_b ? oj(*r.class_b) : oj(nullptr)},
        {"direction", r.direction ? oj(*r.direction) : oj(nullptr)},
        {"answers", r.answers},
        {"cells", r.cells},
    };
}

QaRecord qa_record_from_json(const json& j)
{
    if (!j.is_object())
        throw Error("record must be a JSON object");
    if (j.contains("schema_version") && j.at("schema_version") != kSchemaVersion)
        throw Error("unsupported schema_version " + j.at("schema_version").dump());
    QaRecord r;
    r.question_id = read_string(j, "question_id");
    r.image_id = read_string(j, "image_id");
    r.split = j.contains("split") && !j.at("split").is_null() ? read_string(j, "split") : "";
    r.qtype = read_string(j, "qtype");
    r.subtype = read_optional_string(j, "subtype").value_or("");
    r.template_id = j.contains("template_id") ? read_string(j, "template_id") : "";
    r.question = read_string(j, "question");
    r.class_a = read_optional_string(j, "class_a");
    r.class_b = read_optional_string(j, "class_b");
    r.direction = read_optional_string(j, "direction");
    r.answers = read_string_array(j, "answers");
    r.cells = read_string_array(j, "cells");
    qtype_from_wire(r.qtype, r.subtype);  // validates the pair
    return r;
}

nlohmann::ordered_json to_json(const PredictionRecord& p)
{
    return nlohmann::ordered_json{{"question_id", p.question_id}, {"answers", p.answers}, {"cells", p.cells}};
}

PredictionRecord prediction_from_json(const json& j)
{
    if (!j.is_object())
        throw Error("prediction must be a JSON object");
    PredictionRecord p;
    p.question_id = read_string(j, "question_id");
    p.answers = read_string_array(j, "answers");
    p.cells = read_string_array(j, "cells");
    return p;
}

std::string to_line(const QaRecord& r) { return to_json(r).dump(); }

// ---------------------------------------------------------------------------

JsonlReader::JsonlReader(const std::filesystem::path& path) : path_(path), in_(path, std::ios::binary)
{
    if (!in_)
        throw Error("cannot open " + path.string());
}

bool JsonlReader::next_line(std::string& line)
{
    while (std::getline(in_, line)) {
        ++line_no_;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.find_first_not_of(" \t") != std::string::npos)
            return true;
    }
    if (in_.bad())
        throw Error("read error on " + path_.string());
    return false;
}

void JsonlReader::fail(std::string_view what) const
{
    throw Error(path_.string() + ": line " + std::to_string(line_no_) + ": " + std::string(what));
}

void read_qa_jsonl(const std::filesystem::path& path, const std::function<void(QaRecord&&)>& fn)
{
    JsonlReader reader(path);
    std::string line;
    while (reader.next_line(line)) {
        QaRecord rec;
        try {
            rec = qa_record_from_json(json::parse(line));
        } catch (const json::exception& e) {
            reader.fail(e.what());
        } catch (const Error& e) {
            reader.fail(e.what());
        }
        fn(std::move(rec));
    }
}

std::vector<QaRecord> read_qa_jsonl(const std::filesystem::path& path)
{
    std::vector<QaRecord> out;
    read_qa_jsonl(path, [&](QaRecord&& r) { out.push_back(std::move(r)); });
    return out;
}

std::vector<PredictionRecord> read_predictions_jsonl(const std::filesystem::path& path)
{
    std::vector<PredictionRecord> out;
    JsonlReader reader(path);
    std::string line;
    while (reader.next_line(line)) {
        try {
            out.push_back(prediction_from_json(json::parse(line)));
        } catch (const json::exception& e) {
            reader.fail(e.what());
        } catch (const Error& e) {
            reader.fail(e.what());
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

AtomicWriter::AtomicWriter(std::filesystem::path path) : path_(std::move(path))
{
    tmp_ = path_;
    tmp_ += ".tmp." + std::to_string(::getpid());
    out_.open(tmp_, std::ios::binary | std::ios::trunc);
    if (!out_)
        throw Error("cannot open " + tmp_.string() + " for writing");
}

AtomicWriter::~AtomicWriter()
{
    if (!committed_) {
        out_.close();
        std::error_code ec;
        std::filesystem::remove(tmp_, ec);
    }
}

void AtomicWriter::write_line(std::string_view line)
{
    out_.write(line.data(), static_cast<std::streamsize>(line.size()));
    out_.put('\n');
}

void AtomicWriter::commit()
{
    out_.flush();
    if (!out_)
        throw Error("write error on " + tmp_.string());
    out_.close();
    std::error_code ec;
    std::filesystem::rename(tmp_, path_, ec);
    if (ec)
        throw Error("cannot rename " + tmp_.string() + " to " + path_.string() + ": " + ec.message());
    committed_ = true;
}

void write_qa_jsonl(const std::filesystem::path& path, const std::vector<QaRecord>& records)
{
    AtomicWriter w(path);
    for (const auto& r : records)
        w.write_line(to_line(r));
    w.commit();
}

void write_text_file(const std::filesystem::path& path, std::string_view text)
{
    AtomicWriter w(path);
    w.stream() << text;
    w.commit();
}

std::string read_text_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace gridvqa
