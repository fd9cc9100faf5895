// Copyright 2026 The ctxnoise Authors
// SPDX-License-Identifier: Apache-2.0

#include "ctxnoise/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>

#include "ctxnoise/csv.hpp"
#include "ctxnoise/error.hpp"
#include "ctxnoise/jsonl.hpp"
#include "ctxnoise/parallel.hpp"
#include "ctxnoise/templates.hpp"
#include "ctxnoise/text.hpp"

namespace ctxnoise::eval {

namespace {

const std::vector<std::string> kPairOrder = {"hi-en", "fa-en", "fi-en", "ja-en", "fr-en",
                                             "ko-en", "ru-en", "de-en", "en-fa", "en-de"};

size_t condition_rank(const std::string& name) {
  for (size_t i = 0; i < conditions::kAllConditions.size(); ++i) {
    if (conditions::to_string(conditions::kAllConditions[i]) == name) return i;
  }
  return conditions::kAllConditions.size();
}

std::string judge_template(const std::string& name, const JudgeOptions& options) {
  return templates::load(name, options.template_dir);
}

bool is_digit(char c) { return c >= '0' && c <= '9'; }

}  // namespace

json FidelityJudgement::to_json() const {
  return json{{"instance_id", instance_id}, {"condition", condition}, {"pair", pair_key},
              {"votes", votes},             {"score", score},         {"valid", valid},
              {"calls", calls},             {"unparseable", unparseable}};
}

FidelityJudgement FidelityJudgement::from_json(const json& j) {
  FidelityJudgement f;
  f.instance_id = j.at("instance_id").get<std::string>();
  f.condition = j.at("condition").get<std::string>();
  f.pair_key = j.value("pair", std::string());
  f.votes = j.at("votes").get<std::array<int, 4>>();
  f.score = j.at("score").get<int>();
  f.valid = j.value("valid", true);
  f.calls = j.value("calls", 0);
  f.unparseable = j.value("unparseable", 0);
  if (f.score < 0 || f.score > 3) fail(ErrorKind::kValidation, "fidelity score out of range for " + f.instance_id);
  return f;
}

json CARJudgement::to_json() const {
  return json{{"instance_id", instance_id}, {"condition", condition},     {"pair", pair_key},
              {"adopted", adopted},         {"in_output", in_output},     {"in_baseline", in_baseline},
              {"valid", valid},             {"judge_rationale", judge_rationale}};
}

CARJudgement CARJudgement::from_json(const json& j) {
  CARJudgement c;
  c.instance_id = j.at("instance_id").get<std::string>();
  c.condition = j.at("condition").get<std::string>();
  c.pair_key = j.value("pair", std::string());
  c.adopted = j.at("adopted").get<int>();
  c.in_output = j.value("in_output", false);
  c.in_baseline = j.value("in_baseline", false);
  c.valid = j.value("valid", true);
  c.judge_rationale = j.value("judge_rationale", std::string());
  return c;
}

std::optional<int> parse_rating(const std::string& answer) {
  for (size_t i = 0; i < answer.size(); ++i) {
    if (!is_digit(answer[i])) continue;
    size_t j = i;
    while (j < answer.size() && is_digit(answer[j])) ++j;
    // Decimals like "2.5" are not ratings.
    if (j + 1 < answer.size() && answer[j] == '.' && is_digit(answer[j + 1])) return std::nullopt;
    if (i > 0 && answer[i - 1] == '-') return std::nullopt;
    const std::string digits = answer.substr(i, j - i);
    if (digits.size() != 1) return std::nullopt;
    const int v = digits[0] - '0';
    if (v > 3) return std::nullopt;
    return v;
  }
  return std::nullopt;
}

std::optional<bool> parse_yes_no(const std::string& answer) {
  const auto tokens = text::tokenize(text::casefold(answer));
  bool yes = false, no = false;
  for (size_t i = 0; i < tokens.size(); ++i) {
    const bool y = tokens[i] == "yes", n = tokens[i] == "no";
    if (i == 0 && (y || n)) return y;
    yes = yes || y;
    no = no || n;
  }
  if (yes == no) return std::nullopt;
  return yes;
}

int mode_score(const std::array<int, 4>& votes) {
  int best = 0;
  for (int r = 1; r < 4; ++r) {
    if (votes[r] > votes[best]) best = r;
  }
  return best;
}

FidelityJudgement judge_fidelity(const std::string& y, const std::string& m, gateway::ChatClient& judge,
                                 gateway::ResponseCache& cache, const JudgeOptions& options,
                                 const std::optional<std::string>& reference) {
  if (options.runs <= 0) fail(ErrorKind::kConfig, "judge runs must be positive");
  const bool with_ref = options.include_reference && reference.has_value();
  const std::string tpl = judge_template(with_ref ? "judge_fidelity_reference" : "judge_fidelity", options);
  std::map<std::string, std::string> vars = {{"meaning", m}, {"translation", y}};
  if (with_ref) vars["reference"] = *reference;
  const std::string prompt = text::render(tpl, vars);
  FidelityJudgement f;
  for (int run = 0; run < options.runs; ++run) {
    for (int attempt = 0; attempt <= options.max_resamples; ++attempt) {
      gateway::ChatRequest req;
      req.model_id = judge.model_id();
      req.messages = {{"user", prompt}};
      req.params = gateway::DecodeParams::sampled(options.temperature, options.max_tokens);
      req.cache_salt = "fidelity-run-" + std::to_string(run) + "-try-" + std::to_string(attempt);
      req.purpose = "judge:fidelity";
      req.vars = vars;
      const auto out = gateway::complete_cached(judge, cache, req);
      ++f.calls;
      if (auto r = parse_rating(out.response.content)) {
        ++f.votes[*r];
        break;
      }
      ++f.unparseable;
    }
  }
  int total = 0;
  for (int v : f.votes) total += v;
  f.score = mode_score(f.votes);
  f.valid = total == options.runs &&
            static_cast<double>(f.unparseable) <= options.max_unparseable_fraction * static_cast<double>(f.calls);
  return f;
}

CARJudgement judge_car(const std::string& y, const std::optional<std::string>& y_no_context,
                       const std::string& context_text, gateway::ChatClient& judge, gateway::ResponseCache& cache,
                       const JudgeOptions& options) {
  if (!y_no_context) fail(ErrorKind::kValidation, "missing no-context baseline translation");
  const std::string tpl = judge_template("judge_car", options);
  CARJudgement c;
  auto ask = [&](const std::string& translation, const char* which) -> std::optional<bool> {
    const std::map<std::string, std::string> vars = {{"meaning", context_text}, {"translation", translation}};
    const std::string prompt = text::render(tpl, vars);
    for (int attempt = 0; attempt <= options.max_resamples; ++attempt) {
      gateway::ChatRequest req;
      req.model_id = judge.model_id();
      req.messages = {{"user", prompt}};
      req.params = options.car_temperature > 0.0 ? gateway::DecodeParams::sampled(options.car_temperature, options.max_tokens)
                                                 : gateway::DecodeParams::greedy_decoding(options.max_tokens);
      req.cache_salt = std::string("car-") + which + "-try-" + std::to_string(attempt);
      req.purpose = "judge:car";
      req.vars = vars;
      const auto out = gateway::complete_cached(judge, cache, req);
      if (!c.judge_rationale.empty()) c.judge_rationale += " | ";
      c.judge_rationale += std::string(which) + ": " + text::trim(out.response.content);
      if (auto v = parse_yes_no(out.response.content)) return v;
    }
    return std::nullopt;
  };
  const auto in_y = ask(y, "output");
  const auto in_base = ask(*y_no_context, "baseline");
  c.valid = in_y.has_value() && in_base.has_value();
  c.in_output = in_y.value_or(false);
  c.in_baseline = in_base.value_or(false);
  c.adopted = c.valid && c.in_output && !c.in_baseline ? 1 : 0;
  return c;
}

std::vector<FidelityJudgement> judge_fidelity_all(const std::vector<gateway::TranslationRecord>& records,
                                                  const corpus::Dataset& dataset, gateway::ChatClient& judge,
                                                  gateway::ResponseCache& cache, const JudgeOptions& options) {
  std::vector<FidelityJudgement> out(records.size());
  parallel_for(records.size(), options.concurrency, [&](size_t i) {
    const auto& rec = records[i];
    const auto* inst = dataset.find(rec.instance_id);
    if (!inst) fail(ErrorKind::kValidation, "record for unknown instance " + rec.instance_id);
    auto f = judge_fidelity(rec.output_translation, inst->gold_meaning, judge, cache, options,
                            inst->reference_translation);
    f.instance_id = rec.instance_id;
    f.condition = rec.condition;
    f.pair_key = rec.pair_key.empty() ? inst->pair.key() : rec.pair_key;
    out[i] = std::move(f);
  });
  return out;
}

std::vector<CARJudgement> judge_car_all(const std::vector<gateway::TranslationRecord>& records,
                                        const std::vector<conditions::TranslationTask>& tasks,
                                        gateway::ChatClient& judge, gateway::ResponseCache& cache,
                                        const JudgeOptions& options) {
  std::map<std::pair<std::string, std::string>, const conditions::TranslationTask*> task_index;
  for (const auto& t : tasks) task_index[{t.instance_id, std::string(conditions::to_string(t.condition))}] = &t;
  std::map<std::string, const gateway::TranslationRecord*> baselines;
  std::vector<const gateway::TranslationRecord*> todo;
  for (const auto& r : records) {
    if (r.condition == "none") {
      baselines[r.instance_id] = &r;
    } else {
      todo.push_back(&r);
    }
  }
  std::vector<CARJudgement> out(todo.size());
  parallel_for(todo.size(), options.concurrency, [&](size_t i) {
    const auto& rec = *todo[i];
    auto t = task_index.find({rec.instance_id, rec.condition});
    if (t == task_index.end() || !t->second->context_text) {
      fail(ErrorKind::kValidation, "no context text for " + rec.instance_id + "/" + rec.condition);
    }
    auto base = baselines.find(rec.instance_id);
    if (base == baselines.end()) {
      fail(ErrorKind::kValidation, "missing no-context baseline translation for " + rec.instance_id);
    }
    auto c = judge_car(rec.output_translation, base->second->output_translation, *t->second->context_text, judge,
                       cache, options);
    c.instance_id = rec.instance_id;
    c.condition = rec.condition;
    c.pair_key = rec.pair_key;
    out[i] = std::move(c);
  });
  return out;
}

gateway::ChatResponse StubJudge::complete(const gateway::ChatRequest& request) {
  ++calls_;
  auto get = [&](const char* k) {
    auto it = request.vars.find(k);
    if (it == request.vars.end()) fail(ErrorKind::kUpstream, std::string("stub judge needs request var ") + k);
    return text::casefold(it->second);
  };
  const std::string meaning = get("meaning");
  const std::string translation = get("translation");
  const bool contains = !meaning.empty() && translation.find(meaning) != std::string::npos;
  std::string answer;
  if (request.purpose == "judge:car") {
    answer = contains ? "yes" : "no";
  } else if (request.purpose == "judge:fidelity") {
    int rating = 0;
    if (contains) {
      rating = 3;
    } else {
      const auto mt = text::tokenize(meaning);
      const std::set<std::string> words(mt.begin(), mt.end());
      for (const auto& w : text::tokenize(translation)) {
        if (words.count(w)) {
          rating = 1;
          break;
        }
      }
    }
    answer = std::to_string(rating);
  } else {
    fail(ErrorKind::kUpstream, "stub judge got an unknown purpose: " + request.purpose);
  }
  gateway::ChatResponse r;
  r.content = answer;
  r.raw = json{{"content", answer}}.dump();
  return r;
}

gateway::ChatResponse FunctionJudge::complete(const gateway::ChatRequest& request) {
  ++calls_;
  gateway::ChatResponse r;
  r.content = fn_(request);
  r.raw = json{{"content", r.content}}.dump();
  return r;
}

// ---- aggregation -------------------------------------------------------------

double round_half_up(double x, int decimals) {
  const double scale = std::pow(10.0, decimals);
  // The nudge keeps values like 1.15 (stored as 1.1499...) rounding up.
  return std::floor(x * scale + 0.5 + 1e-9) / scale;
}

AggregateRow make_row(const std::string& condition, std::map<std::string, double> fidelity,
                      std::map<std::string, double> aux) {
  AggregateRow row;
  row.condition = condition;
  row.fidelity = std::move(fidelity);
  row.aux = std::move(aux);
  auto mean = [](const std::map<std::string, double>& m) -> std::optional<double> {
    if (m.empty()) return std::nullopt;
    double s = 0.0;
    for (const auto& [k, v] : m) s += v;
    return s / static_cast<double>(m.size());
  };
  row.avg_f = mean(row.fidelity);
  row.avg_c = mean(row.aux);
  return row;
}

namespace {

std::vector<AggregateRow> rows_from(const std::map<std::string, std::map<std::string, double>>& fid,
                                    const std::map<std::string, std::map<std::string, double>>& aux,
                                    const std::map<std::string, std::map<std::string, size_t>>& counts) {
  std::set<std::string> names;
  for (const auto& [c, _] : fid) names.insert(c);
  for (const auto& [c, _] : aux) names.insert(c);
  std::vector<std::string> ordered(names.begin(), names.end());
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const auto& a, const auto& b) { return condition_rank(a) < condition_rank(b); });
  std::vector<AggregateRow> rows;
  for (const auto& c : ordered) {
    auto f = fid.count(c) ? fid.at(c) : std::map<std::string, double>{};
    auto a = aux.count(c) ? aux.at(c) : std::map<std::string, double>{};
    rows.push_back(make_row(c, std::move(f), std::move(a)));
    if (counts.count(c)) rows.back().counts = counts.at(c);
  }
  return rows;
}

std::map<std::string, std::map<std::string, double>> nest(const CellScores& cells) {
  std::map<std::string, std::map<std::string, double>> out;
  for (const auto& [key, v] : cells) out[key.first][key.second] = v;
  return out;
}

}  // namespace

std::vector<AggregateRow> aggregate(const std::vector<FidelityJudgement>& judgements, const CellScores& aux) {
  if (judgements.empty()) fail(ErrorKind::kValidation, "no judgements to aggregate");
  std::map<std::string, std::map<std::string, std::pair<double, size_t>>> sums;
  for (const auto& j : judgements) {
    if (!j.valid) continue;
    auto& cell = sums[j.condition][j.pair_key];
    cell.first += j.score;
    ++cell.second;
  }
  if (sums.empty()) fail(ErrorKind::kValidation, "every judgement is flagged invalid");
  std::map<std::string, std::map<std::string, double>> fid;
  std::map<std::string, std::map<std::string, size_t>> counts;
  for (const auto& [c, pairs] : sums) {
    for (const auto& [p, s] : pairs) {
      fid[c][p] = s.first / static_cast<double>(s.second);
      counts[c][p] = s.second;
    }
  }
  return rows_from(fid, nest(aux), counts);
}

std::vector<AggregateRow> aggregate_cells(const CellScores& fidelity, const CellScores& aux) {
  if (fidelity.empty() && aux.empty()) fail(ErrorKind::kValidation, "no cells to aggregate");
  return rows_from(nest(fidelity), nest(aux), {});
}

namespace {

double parse_number(const std::string& s, const std::string& where) {
  try {
    size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    fail(ErrorKind::kValidation, where + ": not a number: '" + s + "'");
  }
}

std::map<std::string, size_t> header_index(const csv::Row& header) {
  std::map<std::string, size_t> idx;
  for (size_t i = 0; i < header.fields.size(); ++i) idx[text::casefold(text::trim(header.fields[i]))] = i;
  return idx;
}

}  // namespace

void load_cell_table(const std::string& path, CellScores& fidelity, CellScores& aux) {
  const auto rows = csv::parse(text::read_file(path));
  if (rows.empty()) fail(ErrorKind::kValidation, path + ": empty table");
  const auto idx = header_index(rows[0]);
  for (const char* col : {"condition", "pair"}) {
    if (!idx.count(col)) fail(ErrorKind::kValidation, path + ": missing column " + col);
  }
  const auto fcol = idx.find("fidelity");
  auto ccol = idx.find("comet");
  if (ccol == idx.end()) ccol = idx.find("aux");
  for (size_t r = 1; r < rows.size(); ++r) {
    const auto& f = rows[r].fields;
    const std::string where = path + ":" + std::to_string(rows[r].line);
    auto cell = [&](size_t i) { return i < f.size() ? text::trim(f[i]) : std::string(); };
    const std::pair<std::string, std::string> key{cell(idx.at("condition")), cell(idx.at("pair"))};
    if (fcol != idx.end() && !cell(fcol->second).empty()) fidelity[key] = parse_number(cell(fcol->second), where);
    if (ccol != idx.end() && !cell(ccol->second).empty()) aux[key] = parse_number(cell(ccol->second), where);
  }
}

CellScores load_aux_scores(const std::string& path) {
  const auto rows = csv::parse(text::read_file(path));
  if (rows.empty()) fail(ErrorKind::kValidation, path + ": empty table");
  const auto idx = header_index(rows[0]);
  for (const char* col : {"condition", "pair", "score"}) {
    if (!idx.count(col)) fail(ErrorKind::kValidation, path + ": missing column " + col);
  }
  CellScores out;
  for (size_t r = 1; r < rows.size(); ++r) {
    const auto& f = rows[r].fields;
    if (f.size() < idx.size()) fail(ErrorKind::kValidation, path + ":" + std::to_string(rows[r].line) + ": short row");
    out[{text::trim(f[idx.at("condition")]), text::trim(f[idx.at("pair")])}] =
        parse_number(text::trim(f[idx.at("score")]), path + ":" + std::to_string(rows[r].line));
  }
  return out;
}

std::vector<std::string> pair_columns(const std::vector<AggregateRow>& rows) {
  std::set<std::string> seen;
  for (const auto& r : rows) {
    for (const auto& [p, _] : r.fidelity) seen.insert(p);
    for (const auto& [p, _] : r.aux) seen.insert(p);
  }
  std::vector<std::string> out;
  for (const auto& p : kPairOrder) {
    if (seen.erase(p)) out.push_back(p);
  }
  out.insert(out.end(), seen.begin(), seen.end());
  return out;
}

namespace {

std::string fmt(double v, int decimals) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(decimals) << round_half_up(v, decimals);
  return s.str();
}

std::string label(const std::string& pair_key) {
  const auto dash = pair_key.find('-');
  if (dash == std::string::npos) return pair_key;
  corpus::LanguagePair p;
  p.source_lang = pair_key.substr(0, dash);
  p.target_lang = pair_key.substr(dash + 1);
  return p.label();
}

}  // namespace

std::string format_table(const std::vector<AggregateRow>& rows) {
  const auto cols = pair_columns(rows);
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> head{"condition"};
  for (const auto& p : cols) {
    head.push_back(label(p) + " F");
    head.push_back(label(p) + " C");
  }
  head.push_back("Avg_C");
  head.push_back("Avg_F");
  cells.push_back(head);
  for (const auto& r : rows) {
    std::vector<std::string> line{r.condition};
    for (const auto& p : cols) {
      line.push_back(r.fidelity.count(p) ? fmt(r.fidelity.at(p), 1) : "-");
      line.push_back(r.aux.count(p) ? fmt(r.aux.at(p), 1) : "-");
    }
    line.push_back(r.avg_c ? fmt(*r.avg_c, 1) : "-");
    line.push_back(r.avg_f ? fmt(*r.avg_f, 1) : "-");
    cells.push_back(line);
  }
  // Drop columns that are empty in every row (e.g. no aux scores at all).
  std::vector<bool> keep(head.size(), false);
  keep[0] = true;
  for (size_t c = 1; c < head.size(); ++c) {
    for (size_t r = 1; r < cells.size(); ++r) keep[c] = keep[c] || cells[r][c] != "-";
  }
  std::vector<size_t> width(head.size(), 0);
  for (const auto& line : cells) {
    for (size_t c = 0; c < line.size(); ++c) width[c] = std::max(width[c], text::display_width(line[c]));
  }
  std::ostringstream out;
  for (const auto& line : cells) {
    bool first = true;
    for (size_t c = 0; c < line.size(); ++c) {
      if (!keep[c]) continue;
      if (!first) out << "  ";
      const size_t pad = width[c] - text::display_width(line[c]);
      if (c == 0) {
        out << line[c] << std::string(pad, ' ');
      } else {
        out << std::string(pad, ' ') << line[c];
      }
      first = false;
    }
    out << "\n";
  }
  return out.str();
}

std::string format_csv(const std::vector<AggregateRow>& rows) {
  std::string out = csv::format_row({"condition", "pair", "fidelity", "aux", "n"});
  for (const auto& r : rows) {
    for (const auto& p : pair_columns({r})) {
      auto num = [](const std::map<std::string, double>& m, const std::string& k) {
        if (!m.count(k)) return std::string();
        std::ostringstream s;
        s << std::setprecision(10) << m.at(k);
        return s.str();
      };
      out += csv::format_row({r.condition, p, num(r.fidelity, p), num(r.aux, p),
                              r.counts.count(p) ? std::to_string(r.counts.at(p)) : std::string()});
    }
    auto avg = [](const std::optional<double>& v) {
      if (!v) return std::string();
      std::ostringstream s;
      s << std::setprecision(10) << *v;
      return s.str();
    };
    out += csv::format_row({r.condition, "avg", avg(r.avg_f), avg(r.avg_c), ""});
  }
  return out;
}

std::map<std::string, std::map<std::string, CARRate>> car_rates(const std::vector<CARJudgement>& judgements) {
  std::map<std::string, std::map<std::string, CARRate>> out;
  for (const auto& j : judgements) {
    if (!j.valid) continue;
    for (const auto& key : {j.pair_key, std::string("all")}) {
      auto& r = out[j.condition][key];
      r.adopted += static_cast<size_t>(j.adopted);
      ++r.total;
    }
  }
  return out;
}

// ---- human agreement ---------------------------------------------------------

std::map<std::string, double> parse_human_ratings(const std::string& csv_text, const std::string& source) {
  const auto rows = csv::parse(csv_text);
  if (rows.empty()) fail(ErrorKind::kValidation, source + ": empty annotation file");
  const auto idx = header_index(rows[0]);
  for (const char* col : {"item_id", "annotator_id", "rating"}) {
    if (!idx.count(col)) fail(ErrorKind::kValidation, source + ": missing column " + col);
  }
  std::map<std::string, std::pair<double, size_t>> sums;
  std::set<std::pair<std::string, std::string>> seen;
  for (size_t r = 1; r < rows.size(); ++r) {
    const auto& f = rows[r].fields;
    const std::string where = source + ":" + std::to_string(rows[r].line);
    if (f.size() < 3) fail(ErrorKind::kValidation, where + ": short row");
    const std::string item = text::trim(f[idx.at("item_id")]);
    const std::string annotator = text::trim(f[idx.at("annotator_id")]);
    const double rating = parse_number(text::trim(f[idx.at("rating")]), where);
    if (rating < 0.0 || rating > 3.0) fail(ErrorKind::kValidation, where + ": rating outside 0-3");
    if (!seen.emplace(item, annotator).second) {
      fail(ErrorKind::kValidation, where + ": annotator " + annotator + " rated " + item + " twice");
    }
    sums[item].first += rating;
    ++sums[item].second;
  }
  std::map<std::string, double> out;
  for (const auto& [item, s] : sums) out[item] = s.first / static_cast<double>(s.second);
  return out;
}

std::map<std::string, double> load_human_ratings(const std::string& path) {
  return parse_human_ratings(text::read_file(path), path);
}

numerics::Correlations correlate_with_humans(const std::map<std::string, double>& automatic,
                                             const std::map<std::string, double>& human) {
  std::vector<std::string> only_auto, only_human;
  for (const auto& [k, _] : automatic) {
    if (!human.count(k)) only_auto.push_back(k);
  }
  for (const auto& [k, _] : human) {
    if (!automatic.count(k)) only_human.push_back(k);
  }
  if (!only_auto.empty() || !only_human.empty()) {
    std::string msg = "item ids differ between automatic and human scores";
    if (!only_auto.empty()) msg += "; only automatic: " + only_auto.front();
    if (!only_human.empty()) msg += "; only human: " + only_human.front();
    fail(ErrorKind::kValidation, msg);
  }
  std::vector<double> a, h;
  for (const auto& [k, v] : automatic) {
    a.push_back(v);
    h.push_back(human.at(k));
  }
  return numerics::correlations(a, h);
}

std::string format_correlations(const std::vector<CorrelationRow>& rows) {
  std::ostringstream out;
  out << std::left << std::setw(12) << "metric" << std::setw(8) << "pair" << std::right << std::setw(9) << "r"
      << std::setw(9) << "rho" << std::setw(9) << "tau" << std::setw(6) << "n" << "\n";
  auto cell = [](const std::optional<double>& v) {
    if (!v) return std::string("n/a");
    std::ostringstream s;
    s << std::fixed << std::setprecision(4) << *v;
    return s.str();
  };
  for (const auto& r : rows) {
    out << std::left << std::setw(12) << r.metric << std::setw(8) << r.pair_key << std::right << std::setw(9)
        << cell(r.values.pearson) << std::setw(9) << cell(r.values.spearman) << std::setw(9)
        << cell(r.values.kendall_tau_b) << std::setw(6) << r.items << "\n";
  }
  return out.str();
}

template <typename T>
void write_jsonl(const std::string& path, const std::vector<T>& items) {
  std::vector<json> rows;
  rows.reserve(items.size());
  for (const auto& i : items) rows.push_back(i.to_json());
  jsonl::write(path, rows);
}

template void write_jsonl<FidelityJudgement>(const std::string&, const std::vector<FidelityJudgement>&);
template void write_jsonl<CARJudgement>(const std::string&, const std::vector<CARJudgement>&);

namespace {

template <typename T>
std::vector<T> load_items(const std::string& path) {
  std::vector<T> out;
  for (const auto& line : jsonl::read(path)) {
    try {
      out.push_back(T::from_json(line.value));
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      fail(ErrorKind::kValidation, path + ":" + std::to_string(line.number) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace

std::vector<FidelityJudgement> load_fidelity(const std::string& path) { return load_items<FidelityJudgement>(path); }
std::vector<CARJudgement> load_car(const std::string& path) { return load_items<CARJudgement>(path); }

}  // namespace ctxnoise::eval
