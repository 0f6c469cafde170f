#include "symtime/evaluation.hpp"

#include "symtime/error.hpp"
#include "symtime/facts.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace symtime {

namespace {

bool is_ascii_punct(char c) {
    const auto u = static_cast<unsigned char>(c);
    return (u >= 33 && u <= 47) || (u >= 58 && u <= 64) || (u >= 91 && u <= 96) || (u >= 123 && u <= 126);
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

std::vector<std::string> split_tokens(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (is_space(c)) {
            if (!cur.empty()) out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

double f1_single(const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
    if (pred.empty() && gold.empty()) return 1.0;
    if (pred.empty() || gold.empty()) return 0.0;
    std::map<std::string_view, int> remaining;
    for (const auto& t : gold) ++remaining[t];
    std::size_t common = 0;
    for (const auto& t : pred) {
        auto it = remaining.find(t);
        if (it != remaining.end() && it->second > 0) {
            --it->second;
            ++common;
        }
    }
    if (common == 0) return 0.0;
    const double p = static_cast<double>(common) / static_cast<double>(pred.size());
    const double r = static_cast<double>(common) / static_cast<double>(gold.size());
    return 2 * p * r / (p + r);
}

void require_golds(const std::vector<std::string>& golds) {
    if (golds.empty()) throw Error(Errc::invalid_argument, "gold answer list is empty");
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::io, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw Error(Errc::io, "error reading " + path.string());
    return ss.str();
}

// Calls fn(line_number, line) for every non-blank line.
template <class Fn>
void for_each_line(std::string_view text, Fn fn) {
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        ++line_no;
        std::string_view line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.find_first_not_of(" \t") != std::string_view::npos) fn(line_no, line);
        if (end == text.size()) break;
        start = end + 1;
    }
}

std::string string_field(const nlohmann::json& j, std::initializer_list<const char*> keys, bool required) {
    for (const char* k : keys) {
        auto it = j.find(k);
        if (it == j.end() || it->is_null()) continue;
        if (it->is_string()) return it->get<std::string>();
        if (it->is_number_integer()) return std::to_string(it->get<long long>());
        throw Error(Errc::invalid_argument, std::string("field '") + k + "' must be a string");
    }
    if (required) throw Error(Errc::invalid_argument, std::string("missing field '") + *keys.begin() + "'");
    return {};
}

std::vector<std::string> answer_list(const nlohmann::json& v, const char* key) {
    std::vector<std::string> out;
    const auto add = [&out, key](const nlohmann::json& a) {
        if (!a.is_string()) throw Error(Errc::invalid_argument, std::string("'") + key + "' entries must be strings");
        const std::string s = collapse_whitespace(a.get<std::string>());
        if (!s.empty()) out.push_back(s);
    };
    if (v.is_string()) add(v);
    else if (v.is_array())
        for (const auto& a : v) add(a);
    else
        throw Error(Errc::invalid_argument, std::string("'") + key + "' must be a list of strings");
    return out;
}

std::vector<std::string> golds_for(const nlohmann::json& j, Adapter adapter) {
    switch (adapter) {
    case Adapter::canonical:
        if (!j.contains("answers")) throw Error(Errc::invalid_argument, "missing field 'answers'");
        return answer_list(j.at("answers"), "answers");
    case Adapter::timeqa:
        for (const char* k : {"targets", "answers"})
            if (j.contains(k)) return answer_list(j.at(k), k);
        throw Error(Errc::invalid_argument, "missing field 'targets'");
    case Adapter::tempreason:
        if (auto it = j.find("text_answers"); it != j.end()) {
            if (it->is_object() && it->contains("text")) return answer_list(it->at("text"), "text_answers.text");
            return answer_list(*it, "text_answers");
        }
        if (j.contains("answers")) return answer_list(j.at("answers"), "answers");
        throw Error(Errc::invalid_argument, "missing field 'text_answers'");
    }
    return {};
}

DatasetId dataset_for(const nlohmann::json& j, Adapter adapter) {
    const std::string declared = string_field(j, {"dataset"}, false);
    if (!declared.empty()) {
        if (auto id = parse_dataset_id(declared)) return *id;
        throw Error(Errc::invalid_argument, "unknown dataset '" + declared + "'");
    }
    const std::string level = utf8_lower(string_field(j, {"level"}, false));
    if (adapter == Adapter::timeqa) {
        if (level == "easy") return DatasetId::timeqa_easy;
        if (level == "hard") return DatasetId::timeqa_hard;
    } else if (adapter == Adapter::tempreason) {
        if (level == "l2") return DatasetId::tempreason_l2;
        if (level == "l3") return DatasetId::tempreason_l3;
    }
    return DatasetId::custom;
}

EvalRecord record_from(const nlohmann::json& j, Adapter adapter) {
    if (!j.is_object()) throw Error(Errc::invalid_argument, "record is not a JSON object");
    EvalRecord r;
    switch (adapter) {
    case Adapter::canonical:
        r.id = string_field(j, {"id"}, true);
        r.context = string_field(j, {"context"}, true);
        break;
    case Adapter::timeqa:
        r.id = string_field(j, {"idx", "id"}, true);
        r.context = string_field(j, {"context", "paragraph"}, true);
        break;
    case Adapter::tempreason:
        r.id = string_field(j, {"id"}, true);
        r.context = string_field(j, {"fact_context", "context"}, true);
        break;
    }
    r.question = string_field(j, {"question"}, true);
    if (r.id.empty()) throw Error(Errc::invalid_argument, "empty id");
    if (collapse_whitespace(r.question).empty()) throw Error(Errc::invalid_argument, "empty question");
    r.gold_answers = golds_for(j, adapter);
    if (r.gold_answers.empty()) throw Error(Errc::invalid_argument, "no non-empty gold answer");
    r.dataset = dataset_for(j, adapter);
    return r;
}

double mean(const std::vector<double>& xs) {
    double s = 0;
    for (double x : xs) s += x;
    return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

// Per-dataset means (percent) of the given per-item values, in kDatasetOrder.
std::vector<DatasetScore> dataset_means(const std::vector<ItemScore>& items) {
    std::map<DatasetId, std::pair<std::vector<double>, std::vector<double>>> by;
    for (const auto& it : items) {
        by[it.dataset].first.push_back(it.em);
        by[it.dataset].second.push_back(it.f1);
    }
    std::vector<DatasetScore> out;
    for (DatasetId id : kDatasetOrder) {
        auto f = by.find(id);
        if (f == by.end()) continue;
        out.push_back({id, f->second.first.size(), {100.0 * mean(f->second.first), 100.0 * mean(f->second.second)}});
    }
    return out;
}

MetricPair macro_of(const std::vector<DatasetScore>& ds) {
    MetricPair m;
    for (const auto& d : ds) {
        m.em += d.score.em;
        m.f1 += d.score.f1;
    }
    if (!ds.empty()) {
        m.em /= static_cast<double>(ds.size());
        m.f1 /= static_cast<double>(ds.size());
    }
    return m;
}

nlohmann::json to_json(const MetricPair& m) { return {{"em", m.em}, {"f1", m.f1}}; }

nlohmann::json to_json(const std::vector<DatasetScore>& ds) {
    nlohmann::json out = nlohmann::json::object();
    for (const auto& d : ds) out[to_string(d.dataset)] = {{"items", d.items}, {"em", d.score.em}, {"f1", d.score.f1}};
    return out;
}

std::string fixed1(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", v);
    return buf;
}

std::string pad_right(const std::string& s, std::size_t w) { return s.size() >= w ? s : s + std::string(w - s.size(), ' '); }
std::string pad_left(const std::string& s, std::size_t w) { return s.size() >= w ? s : std::string(w - s.size(), ' ') + s; }

} // namespace

// ---------------------------------------------------------------------------

std::string normalize_answer(std::string_view text) {
    std::string lowered = utf8_lower(text);
    std::string kept;
    kept.reserve(lowered.size());
    for (char c : lowered)
        if (!is_ascii_punct(c)) kept.push_back(c);
    std::string out;
    for (const auto& tok : split_tokens(kept)) {
        if (tok == "a" || tok == "an" || tok == "the") continue;
        if (!out.empty()) out.push_back(' ');
        out += tok;
    }
    return out;
}

int exact_match(std::string_view prediction, const std::vector<std::string>& golds) {
    require_golds(golds);
    const std::string p = normalize_answer(prediction);
    for (const auto& g : golds)
        if (normalize_answer(g) == p) return 1;
    return 0;
}

double token_f1(std::string_view prediction, const std::vector<std::string>& golds) {
    require_golds(golds);
    const auto p = split_tokens(normalize_answer(prediction));
    double best = 0.0;
    for (const auto& g : golds) best = std::max(best, f1_single(p, split_tokens(normalize_answer(g))));
    return best;
}

const char* to_string(DatasetId id) {
    switch (id) {
    case DatasetId::timeqa_easy: return "timeqa-easy";
    case DatasetId::timeqa_hard: return "timeqa-hard";
    case DatasetId::tempreason_l2: return "tempreason-l2";
    case DatasetId::tempreason_l3: return "tempreason-l3";
    case DatasetId::custom: return "custom";
    }
    return "custom";
}

std::optional<DatasetId> parse_dataset_id(std::string_view text) {
    const std::string t = utf8_lower(collapse_whitespace(text));
    for (DatasetId id : kDatasetOrder)
        if (t == to_string(id)) return id;
    return std::nullopt;
}

const char* dataset_label(DatasetId id) {
    switch (id) {
    case DatasetId::timeqa_easy: return "TimeQA-Easy";
    case DatasetId::timeqa_hard: return "TimeQA-Hard";
    case DatasetId::tempreason_l2: return "TempReason-L2";
    case DatasetId::tempreason_l3: return "TempReason-L3";
    case DatasetId::custom: return "Custom";
    }
    return "Custom";
}

const char* to_string(Adapter adapter) {
    switch (adapter) {
    case Adapter::canonical: return "canonical";
    case Adapter::timeqa: return "timeqa";
    case Adapter::tempreason: return "tempreason";
    }
    return "canonical";
}

std::optional<Adapter> parse_adapter(std::string_view text) {
    for (Adapter a : {Adapter::canonical, Adapter::timeqa, Adapter::tempreason})
        if (text == to_string(a)) return a;
    return std::nullopt;
}

const EvalRecord* Dataset::find(std::string_view id) const {
    for (const auto& r : records)
        if (r.id == id) return &r;
    return nullptr;
}

Dataset parse_dataset(std::string_view text, Adapter adapter, std::optional<DatasetId> dataset) {
    Dataset out;
    std::set<std::string> seen;
    for_each_line(text, [&](std::size_t line_no, std::string_view line) {
        try {
            const auto j = nlohmann::json::parse(line);
            EvalRecord r = record_from(j, adapter);
            if (dataset) r.dataset = *dataset;
            if (!seen.insert(r.id).second) throw Error(Errc::invalid_argument, "duplicate id '" + r.id + "'");
            out.records.push_back(std::move(r));
        } catch (const nlohmann::json::exception& e) {
            out.diagnostics.push_back({line_no, std::string("malformed JSON: ") + e.what()});
            ++out.skipped;
        } catch (const Error& e) {
            out.diagnostics.push_back({line_no, e.what()});
            ++out.skipped;
        }
    });
    if (out.records.empty()) {
        std::string why = "no valid records";
        if (!out.diagnostics.empty())
            why += " (line " + std::to_string(out.diagnostics.front().line) + ": " + out.diagnostics.front().message + ")";
        throw Error(Errc::empty_dataset, why);
    }
    return out;
}

Dataset load_dataset(const std::filesystem::path& path, Adapter adapter, std::optional<DatasetId> dataset) {
    return parse_dataset(read_text(path), adapter, dataset);
}

nlohmann::json to_json(const Prediction& p) {
    return {{"id", p.id}, {"prediction", p.prediction}, {"run", p.run}};
}

std::vector<Prediction> parse_predictions(std::string_view text) {
    std::vector<Prediction> out;
    for_each_line(text, [&out](std::size_t line_no, std::string_view line) {
        const auto bad = [line_no](const std::string& why) {
            return ParseError(Errc::invalid_argument, "predictions line " + std::to_string(line_no) + ": " + why,
                              Span{0, 0});
        };
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw bad(std::string("malformed JSON: ") + e.what());
        }
        if (!j.is_object()) throw bad("not a JSON object");
        Prediction p;
        try {
            p.id = string_field(j, {"id"}, true);
            p.prediction = string_field(j, {"prediction"}, true);
        } catch (const Error& e) {
            throw bad(e.what());
        }
        auto run = j.find("run");
        if (run != j.end()) {
            if (!run->is_number_integer() || run->get<long long>() < 0) throw bad("'run' must be a non-negative integer");
            p.run = run->get<int>();
        }
        out.push_back(std::move(p));
    });
    return out;
}

std::vector<Prediction> load_predictions(const std::filesystem::path& path) {
    return parse_predictions(read_text(path));
}

std::vector<ItemRuns> score_predictions(const Dataset& dataset, const std::vector<Prediction>& predictions) {
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < dataset.records.size(); ++i) index.emplace(dataset.records[i].id, i);

    std::set<int> run_ids;
    std::map<std::pair<std::size_t, int>, const Prediction*> by_key;
    for (const auto& p : predictions) {
        auto it = index.find(p.id);
        if (it == index.end()) throw Error(Errc::unknown_prediction_id, "prediction for unknown id '" + p.id + "'");
        if (!by_key.emplace(std::pair{it->second, p.run}, &p).second)
            throw Error(Errc::invalid_argument,
                        "duplicate prediction for id '" + p.id + "' run " + std::to_string(p.run));
        run_ids.insert(p.run);
    }
    if (run_ids.empty()) run_ids.insert(0);

    std::vector<ItemRuns> out;
    out.reserve(dataset.records.size());
    for (std::size_t i = 0; i < dataset.records.size(); ++i) {
        const EvalRecord& r = dataset.records[i];
        ItemRuns item{r.id, r.dataset, {}, {}};
        for (int run : run_ids) {
            auto it = by_key.find({i, run});
            if (it == by_key.end()) {
                item.em.push_back(0.0);
                item.f1.push_back(0.0);
            } else {
                item.em.push_back(exact_match(it->second->prediction, r.gold_answers));
                item.f1.push_back(token_f1(it->second->prediction, r.gold_answers));
            }
        }
        out.push_back(std::move(item));
    }
    return out;
}

const DatasetScore* ScoreReport::find(DatasetId id) const {
    for (const auto& d : datasets)
        if (d.dataset == id) return &d;
    return nullptr;
}

ScoreReport aggregate(const std::vector<ItemRuns>& items) {
    if (items.empty()) throw Error(Errc::empty_dataset, "nothing to aggregate");
    const std::size_t runs = items.front().em.size();
    for (const auto& it : items) {
        if (it.em.size() != runs || it.f1.size() != runs)
            throw Error(Errc::aggregation, "item '" + it.id + "' has " + std::to_string(it.em.size()) +
                                               " runs, expected " + std::to_string(runs));
    }
    if (runs == 0) throw Error(Errc::aggregation, "items have no runs");

    ScoreReport report;
    report.runs = runs;
    for (const auto& it : items) report.items.push_back({it.id, it.dataset, mean(it.em), mean(it.f1)});
    report.datasets = dataset_means(report.items);
    report.macro = macro_of(report.datasets);
    for (std::size_t r = 0; r < runs; ++r) {
        std::vector<ItemScore> single;
        for (const auto& it : items) single.push_back({it.id, it.dataset, it.em[r], it.f1[r]});
        report.per_run.push_back(dataset_means(single));
        report.per_run_macro.push_back(macro_of(report.per_run.back()));
    }
    return report;
}

nlohmann::json to_json(const ScoreReport& report) {
    nlohmann::json j;
    j["runs"] = report.runs;
    j["items"] = report.items.size();
    j["datasets"] = to_json(report.datasets);
    j["macro"] = to_json(report.macro);
    j["per_run"] = nlohmann::json::array();
    for (std::size_t r = 0; r < report.per_run.size(); ++r)
        j["per_run"].push_back({{"run", r}, {"datasets", to_json(report.per_run[r])},
                                {"macro", to_json(report.per_run_macro[r])}});
    j["per_item"] = nlohmann::json::array();
    for (const auto& it : report.items)
        j["per_item"].push_back({{"id", it.id}, {"dataset", to_string(it.dataset)}, {"em", it.em}, {"f1", it.f1}});
    return j;
}

std::string render_score_table(const std::vector<std::pair<std::string, ScoreReport>>& rows,
                               std::string_view row_header) {
    std::vector<DatasetId> columns;
    for (DatasetId id : kDatasetOrder)
        for (const auto& [label, report] : rows)
            if (report.find(id)) {
                columns.push_back(id);
                break;
            }

    std::size_t label_w = row_header.size();
    for (const auto& [label, report] : rows) label_w = std::max(label_w, label.size());
    constexpr std::size_t cell = 6;

    std::vector<std::string> groups;
    for (DatasetId id : columns) groups.push_back(dataset_label(id));
    groups.push_back("Avg (Macro)");
    std::vector<std::size_t> group_w;
    for (const auto& g : groups) group_w.push_back(std::max(g.size(), 2 * cell + 1));

    std::ostringstream out;
    out << pad_right(std::string(row_header), label_w);
    for (std::size_t i = 0; i < groups.size(); ++i) out << " | " << pad_right(groups[i], group_w[i]);
    out << "\n" << std::string(label_w, ' ');
    for (std::size_t i = 0; i < groups.size(); ++i)
        out << " | " << pad_right(pad_left("EM", cell) + " " + pad_left("F1", cell), group_w[i]);
    out << "\n" << std::string(label_w, '-');
    for (std::size_t w : group_w) out << "-+-" << std::string(w, '-');
    out << "\n";
    for (const auto& [label, report] : rows) {
        out << pad_right(label, label_w);
        for (std::size_t i = 0; i < columns.size(); ++i) {
            const DatasetScore* d = report.find(columns[i]);
            const std::string em = d ? fixed1(d->score.em) : "-";
            const std::string f1 = d ? fixed1(d->score.f1) : "-";
            out << " | " << pad_right(pad_left(em, cell) + " " + pad_left(f1, cell), group_w[i]);
        }
        out << " | "
            << pad_right(pad_left(fixed1(report.macro.em), cell) + " " + pad_left(fixed1(report.macro.f1), cell),
                         group_w.back());
        out << "\n";
    }
    std::string s = out.str();
    // Trailing spaces from padding the last column carry no information.
    std::string trimmed;
    std::istringstream lines(s);
    for (std::string line; std::getline(lines, line);) {
        while (!line.empty() && line.back() == ' ') line.pop_back();
        trimmed += line + "\n";
    }
    return trimmed;
}

} // namespace symtime
