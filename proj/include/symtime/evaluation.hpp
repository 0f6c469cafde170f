#pragma once

#include <json.hpp>

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace symtime {

// ---------------------------------------------------------------------------
// metrics

/// Lowercase (UTF-8 aware), drop ASCII punctuation, drop the whole tokens
/// "a", "an" and "the", collapse whitespace. Idempotent.
std::string normalize_answer(std::string_view text);

/// 1 iff the normalized prediction equals some normalized gold. Throws
/// Error(invalid_argument) on an empty gold list.
int exact_match(std::string_view prediction, const std::vector<std::string>& golds);

/// Max over golds of multiset token F1 between normalized strings. Two empty
/// token lists score 1 so that exact_match == 1 implies token_f1 == 1.
double token_f1(std::string_view prediction, const std::vector<std::string>& golds);

// ---------------------------------------------------------------------------
// datasets

enum class DatasetId { timeqa_easy, timeqa_hard, tempreason_l2, tempreason_l3, custom };

/// Table column order.
inline constexpr DatasetId kDatasetOrder[] = {DatasetId::timeqa_easy, DatasetId::timeqa_hard,
                                              DatasetId::tempreason_l2, DatasetId::tempreason_l3,
                                              DatasetId::custom};

/// "timeqa-easy", ...
const char* to_string(DatasetId id);
std::optional<DatasetId> parse_dataset_id(std::string_view text);
/// Column header, e.g. "TimeQA-Easy".
const char* dataset_label(DatasetId id);

/// Field-name conventions of the input file.
///   canonical:  id, question, context, answers[], dataset?
///   timeqa:     idx|id, question, context|paragraph, targets[], level? ("easy"/"hard")
///   tempreason: id, question, fact_context|context, text_answers.text[], level? ("L2"/"L3")
enum class Adapter { canonical, timeqa, tempreason };

const char* to_string(Adapter adapter);
std::optional<Adapter> parse_adapter(std::string_view text);

struct EvalRecord {
    std::string id;
    std::string question;
    std::string context;
    std::vector<std::string> gold_answers; // non-empty
    DatasetId dataset = DatasetId::custom;

    friend bool operator==(const EvalRecord&, const EvalRecord&) = default;
};

struct LoadDiagnostic {
    std::size_t line = 0; // 1-based
    std::string message;
};

struct Dataset {
    std::vector<EvalRecord> records;
    std::vector<LoadDiagnostic> diagnostics;
    std::size_t skipped = 0;

    const EvalRecord* find(std::string_view id) const;
};

/// Parses line-delimited JSON records. Blank lines are ignored; malformed
/// lines, records without a usable answer and repeated ids are skipped with a
/// diagnostic. `dataset` overrides the per-record dataset when set.
/// Throws Error(empty_dataset) when no record survives.
Dataset parse_dataset(std::string_view text, Adapter adapter = Adapter::canonical,
                      std::optional<DatasetId> dataset = std::nullopt);

/// parse_dataset on a file; Error(io) when it cannot be read.
Dataset load_dataset(const std::filesystem::path& path, Adapter adapter = Adapter::canonical,
                     std::optional<DatasetId> dataset = std::nullopt);

// ---------------------------------------------------------------------------
// predictions

struct Prediction {
    std::string id;
    std::string prediction;
    int run = 0;

    friend bool operator==(const Prediction&, const Prediction&) = default;
};

nlohmann::json to_json(const Prediction& p);

/// One JSON object per line. Throws ParseError(invalid_argument) naming the
/// line on a malformed entry and Error(io) on an unreadable file.
std::vector<Prediction> parse_predictions(std::string_view text);
std::vector<Prediction> load_predictions(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// scoring

/// Per-run scores of one item; em and f1 have one entry per run.
struct ItemRuns {
    std::string id;
    DatasetId dataset = DatasetId::custom;
    std::vector<double> em;
    std::vector<double> f1;
};

/// Scores every (record, run) pair. The run count is the number of distinct
/// run ids in the predictions (at least 1); runs are ordered by id. A record
/// with no prediction for a run scores 0 for that run. Throws
/// Error(unknown_prediction_id) naming the first id absent from the dataset and
/// Error(invalid_argument) on a repeated (id, run) pair.
std::vector<ItemRuns> score_predictions(const Dataset& dataset, const std::vector<Prediction>& predictions);

struct MetricPair {
    double em = 0; // percent
    double f1 = 0; // percent
};

struct DatasetScore {
    DatasetId dataset = DatasetId::custom;
    std::size_t items = 0;
    MetricPair score;
};

struct ItemScore {
    std::string id;
    DatasetId dataset = DatasetId::custom;
    double em = 0; // mean over runs, in [0, 1]
    double f1 = 0;
};

struct ScoreReport {
    std::size_t runs = 0;
    std::vector<ItemScore> items;
    /// Datasets present, in kDatasetOrder.
    std::vector<DatasetScore> datasets;
    MetricPair macro;
    /// per_run[r] scores run r alone.
    std::vector<std::vector<DatasetScore>> per_run;
    std::vector<MetricPair> per_run_macro;

    const DatasetScore* find(DatasetId id) const;
};

/// Item score = mean over runs; dataset score = mean over its items; macro =
/// unweighted mean over datasets present. Throws Error(aggregation) when items
/// disagree on the run count or have none, and Error(empty_dataset) on no items.
ScoreReport aggregate(const std::vector<ItemRuns>& items);

nlohmann::json to_json(const ScoreReport& report);

/// Aligned text table: one row per (label, report), one EM/F1 column pair per
/// dataset present in any report, then the macro average.
std::string render_score_table(const std::vector<std::pair<std::string, ScoreReport>>& rows,
                               std::string_view row_header = "Method");

} // namespace symtime
