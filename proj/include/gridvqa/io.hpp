#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "gridvqa/eval.hpp"
#include "gridvqa/questions.hpp"

namespace gridvqa {

inline constexpr int kSchemaVersion = 1;

nlohmann::ordered_json to_json(const QaRecord& r);
/// Throws Error describing the first schema violation.
QaRecord qa_record_from_json(const nlohmann::json& j);

nlohmann::ordered_json to_json(const PredictionRecord& p);
PredictionRecord prediction_from_json(const nlohmann::json& j);

/// Compact single-line serialization used for every JSONL output.
std::string to_line(const QaRecord& r);

/// Streams a JSON-lines file one record at a time. Blank lines are skipped;
/// errors name the offending 1-based line number.
class JsonlReader {
public:
    explicit JsonlReader(const std::filesystem::path& path);

    /// Reads the next non-blank line; false at end of file.
    bool next_line(std::string& line);
    std::size_t line_number() const { return line_no_; }
    const std::filesystem::path& path() const { return path_; }

    /// Wraps a parse or schema failure with file and line context.
    [[noreturn]] void fail(std::string_view what) const;

private:
    std::filesystem::path path_;
    std::ifstream in_;
    std::size_t line_no_ = 0;
};

/// Calls `fn` for every record of a QA JSONL file.
void read_qa_jsonl(const std::filesystem::path& path, const std::function<void(QaRecord&&)>& fn);
std::vector<QaRecord> read_qa_jsonl(const std::filesystem::path& path);
std::vector<PredictionRecord> read_predictions_jsonl(const std::filesystem::path& path);

/// Writes to "<path>.tmp.<pid>" and renames over `path` on commit(). An
/// uncommitted writer removes its temp file on destruction.
class AtomicWriter {
public:
    explicit AtomicWriter(std::filesystem::path path);
    ~AtomicWriter();
    AtomicWriter(const AtomicWriter&) = delete;
    AtomicWriter& operator=(const AtomicWriter&) = delete;

    std::ostream& stream() { return out_; }
    void write_line(std::string_view line);
    void commit();

private:
    std::filesystem::path path_;
    std::filesystem::path tmp_;
    std::ofstream out_;
    bool committed_ = false;
};

void write_qa_jsonl(const std::filesystem::path& path, const std::vector<QaRecord>& records);
void write_text_file(const std::filesystem::path& path, std::string_view text);
std::string read_text_file(const std::filesystem::path& path);

} // namespace gridvqa
