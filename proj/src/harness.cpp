#include "trf/harness.hpp"

#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace trf {

namespace {

using nlohmann::json;

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string lower_case(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  std::string item;
  std::stringstream ss{std::string(text)};
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view text) {
  const std::string t = lower_case(trim(text));
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw ConfigError("bad boolean '" + t + "' for " + std::string(key));
}

long long parse_integer(std::string_view key, std::string_view text) {
  const std::string t = trim(text);
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(t, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (t.empty() || used != t.size()) throw ConfigError("bad integer '" + t + "' for " + std::string(key));
  return v;
}

std::string number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fraction(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

Termination termination_from_name(std::string_view name) {
  for (Termination t : {Termination::CriticalPoint, Termination::FeasiblePoint, Termination::ResidualOptimal,
                        Termination::IterLimit, Termination::RestorationFail, Termination::SubsolverFail})
    if (termination_name(t) == name) return t;
  throw Error("unknown status '" + std::string(name) + "'");
}

// Non-finite values travel as strings; JSON has no literal for them.
json num(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

double num_of(const json& j) {
  if (j.is_number()) return j.get<double>();
  const std::string s = j.get<std::string>();
  if (s == "inf") return kInf;
  if (s == "-inf") return -kInf;
  return std::nan("");
}

double metric_of(const RunRecord& r, Metric m) {
  switch (m) {
    case Metric::Iterations:
      return r.report.iterations;
    case Metric::BlackboxCalls:
      return static_cast<double>(r.report.blackbox_calls);
    case Metric::WallTime:
      return r.report.wall_time;
  }
  return 0.0;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

void check_written(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw Error("cannot write " + path.string());
}

std::string safe_file_part(std::string s) {
  for (char& c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') c = '_';
  return s;
}

}  // namespace

// ---- spec -----------------------------------------------------------------

void CampaignSpec::validate() const {
  if (variants.empty()) throw ConfigError("campaign needs at least one variant");
  if (surrogates.empty()) throw ConfigError("campaign needs at least one surrogate");
  if (workers < 1) throw ConfigError("workers must be at least 1");
  if (trim(suite).empty()) throw ConfigError("campaign needs a suite");
  for (Variant v : variants)
    for (SurrogateKind s : surrogates) campaign_config(*this, v, s).validate();
}

CampaignSpec parse_campaign_spec(std::string_view text) {
  CampaignSpec spec;
  bool have_variants = false;
  bool have_surrogates = false;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = lower_case(trim(std::string_view(line).substr(0, eq)));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (key == "variants") {
      spec.variants.clear();
      if (lower_case(value) == "all") {
        spec.variants.assign(std::begin(kAllVariants), std::end(kAllVariants));
      } else {
        for (const auto& v : split_list(value)) spec.variants.push_back(parse_variant(v));
      }
      have_variants = true;
    } else if (key == "surrogates") {
      spec.surrogates.clear();
      if (lower_case(value) == "all") {
        spec.surrogates.assign(std::begin(kAllSurrogateKinds), std::end(kAllSurrogateKinds));
      } else {
        for (const auto& s : split_list(value)) spec.surrogates.push_back(parse_surrogate_kind(s));
      }
      have_surrogates = true;
    } else if (key == "suite") {
      spec.suite = value;
    } else if (key == "workers") {
      spec.workers = static_cast<int>(parse_integer(key, value));
    } else if (key == "seed") {
      const long long s = parse_integer(key, value);
      if (s < 0) throw ConfigError("seed must be non-negative");
      spec.seed = static_cast<std::uint64_t>(s);
    } else if (key == "traces") {
      spec.traces = parse_bool(key, value);
    } else if (key.rfind("config.", 0) == 0) {
      const std::string field = key.substr(7);
      TrfConfig probe;
      set_config_value(probe, field, value);  // rejects unknown keys early
      spec.overrides[field] = value;
    } else {
      throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
  }
  if (!have_variants) throw ConfigError("spec is missing 'variants'");
  if (!have_surrogates) throw ConfigError("spec is missing 'surrogates'");
  spec.validate();
  return spec;
}

CampaignSpec load_campaign_spec(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read spec file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_campaign_spec(ss.str());
}

std::vector<BenchmarkProblem> select_problems(std::string_view suite, std::uint64_t seed) {
  const std::string sel = lower_case(trim(suite));
  if (sel == "engineering") return build_engineering_suite();
  if (sel == "synthetic") return build_synthetic_suite(seed);
  if (sel == "toy") return {toy_problem()};
  if (sel == "all") {
    auto out = build_engineering_suite();
    auto syn = build_synthetic_suite(seed);
    out.insert(out.end(), syn.begin(), syn.end());
    return out;
  }
  const auto names = split_list(suite);
  if (names.empty()) throw ConfigError("empty suite selector");
  std::vector<BenchmarkProblem> pool;
  bool need_eng = false;
  bool need_syn = false;
  for (const auto& d : engineering_definitions())
    if (std::find(names.begin(), names.end(), d->name) != names.end()) need_eng = true;
  for (const auto& d : synthetic_definitions(seed))
    if (std::find(names.begin(), names.end(), d->name) != names.end()) need_syn = true;
  if (need_eng) pool = build_engineering_suite();
  if (need_syn) {
    auto syn = build_synthetic_suite(seed);
    pool.insert(pool.end(), syn.begin(), syn.end());
  }
  pool.push_back(toy_problem());
  std::vector<BenchmarkProblem> out;
  std::set<std::string> seen;
  for (const auto& name : names) {
    auto it = std::find_if(pool.begin(), pool.end(), [&](const BenchmarkProblem& p) { return p.name == name; });
    if (it == pool.end()) throw ConfigError("unknown problem '" + name + "'");
    if (seen.insert(name).second) out.push_back(*it);
  }
  return out;
}

TrfConfig campaign_config(const CampaignSpec& spec, Variant variant, SurrogateKind kind) {
  TrfConfig c = default_config(variant, kind);
  c.seed = spec.seed;
  for (const auto& [key, value] : spec.overrides) set_config_value(c, key, value);
  c.variant = variant;
  c.surrogate_kind = kind;
  return c;
}

// ---- running --------------------------------------------------------------

const RunRecord* CampaignResult::find(Variant v, SurrogateKind s, std::string_view problem) const {
  for (const auto& r : runs)
    if (r.variant == v && r.surrogate == s && r.problem == problem) return &r;
  return nullptr;
}

CampaignResult run_campaign(const CampaignSpec& spec, const ProgressFn& progress) {
  spec.validate();
  return run_campaign(spec, select_problems(spec.suite, spec.seed), progress);
}

CampaignResult run_campaign(const CampaignSpec& spec, const std::vector<BenchmarkProblem>& problems,
                            const ProgressFn& progress) {
  spec.validate();
  const auto t0 = std::chrono::steady_clock::now();
  CampaignResult result;
  result.spec = spec;
  for (const auto& p : problems) result.problems.push_back(p.name);

  struct Task {
    Variant v;
    SurrogateKind s;
    const BenchmarkProblem* p;
  };
  std::vector<Task> tasks;
  for (Variant v : spec.variants)
    for (SurrogateKind s : spec.surrogates)
      for (const auto& p : problems) tasks.push_back({v, s, &p});
  result.runs.resize(tasks.size());

  std::atomic<std::size_t> next{0};
  std::size_t done = 0;
  std::mutex progress_mutex;
  auto work = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      const Task& t = tasks[i];
      RunRecord rec;
      rec.variant = t.v;
      rec.surrogate = t.s;
      rec.problem = t.p->name;
      const TrfConfig config = campaign_config(spec, t.v, t.s);
      try {
        GreyBoxProblem grey = t.p->fresh();
        rec.report = trf_solve(grey, config);
      } catch (const std::exception& e) {
        rec.report = SolveReport{};
        rec.report.status = Termination::SubsolverFail;
        rec.report.f_final = std::nan("");
        rec.report.theta_final = std::nan("");
        rec.report.message = e.what();
      }
      rec.solved = is_solved(*t.p, rec.report);
      result.runs[i] = std::move(rec);
      if (progress) {
        std::lock_guard<std::mutex> lock(progress_mutex);
        progress(result.runs[i], ++done, tasks.size());
      }
    }
  };
  const int n = std::max(1, std::min<int>(spec.workers, static_cast<int>(tasks.size())));
  std::vector<std::thread> pool;
  for (int i = 1; i < n; ++i) pool.emplace_back(work);
  work();
  for (auto& th : pool) th.join();
  result.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

// ---- aggregation ----------------------------------------------------------

std::vector<double> SuccessMatrix::row_means() const {
  std::vector<double> out;
  for (const auto& row : cells) {
    double s = 0.0;
    for (double c : row) s += c;
    out.push_back(row.empty() ? 0.0 : s / static_cast<double>(row.size()));
  }
  return out;
}

std::vector<double> SuccessMatrix::column_means() const {
  std::vector<double> out(surrogates.size(), 0.0);
  if (cells.empty()) return out;
  for (const auto& row : cells)
    for (std::size_t j = 0; j < row.size(); ++j) out[j] += row[j];
  for (double& v : out) v /= static_cast<double>(cells.size());
  return out;
}

SuccessMatrix success_matrix(const CampaignResult& result) {
  SuccessMatrix m;
  m.variants = result.spec.variants;
  m.surrogates = result.spec.surrogates;
  const double count = static_cast<double>(result.problems.size());
  for (Variant v : m.variants) {
    std::vector<double> row;
    for (SurrogateKind s : m.surrogates) {
      int solved = 0;
      for (const auto& r : result.runs)
        if (r.variant == v && r.surrogate == s && r.solved) ++solved;
      row.push_back(count > 0 ? solved / count : 0.0);
    }
    m.cells.push_back(std::move(row));
  }
  return m;
}

std::string_view metric_name(Metric m) {
  switch (m) {
    case Metric::Iterations:
      return "iterations";
    case Metric::BlackboxCalls:
      return "blackbox_calls";
    case Metric::WallTime:
      return "wall_time";
  }
  return "?";
}

Profile performance_profile(const CampaignResult& result, Metric metric) {
  Profile p;
  p.metric = metric;
  std::set<double> budgets;
  for (const auto& r : result.runs) budgets.insert(metric_of(r, metric));
  p.budgets.assign(budgets.begin(), budgets.end());
  const double count = static_cast<double>(result.problems.size());
  for (Variant v : result.spec.variants) {
    for (SurrogateKind s : result.spec.surrogates) {
      ProfileCurve c;
      c.variant = v;
      c.surrogate = s;
      std::vector<double> solved_at;
      for (const auto& r : result.runs)
        if (r.variant == v && r.surrogate == s && r.solved) solved_at.push_back(metric_of(r, metric));
      std::sort(solved_at.begin(), solved_at.end());
      for (double b : p.budgets) {
        const auto k = std::upper_bound(solved_at.begin(), solved_at.end(), b) - solved_at.begin();
        c.fraction.push_back(count > 0 ? static_cast<double>(k) / count : 0.0);
      }
      p.curves.push_back(std::move(c));
    }
  }
  return p;
}

// ---- files ----------------------------------------------------------------

void write_success_matrix_csv(std::ostream& out, const SuccessMatrix& m) {
  out << "variant";
  for (SurrogateKind s : m.surrogates) out << ',' << long_name(s);
  out << ",average\n";
  const auto rows = m.row_means();
  for (std::size_t i = 0; i < m.variants.size(); ++i) {
    out << variant_name(m.variants[i]);
    for (double c : m.cells[i]) out << ',' << fraction(c);
    out << ',' << fraction(rows[i]) << '\n';
  }
  out << "average";
  const auto cols = m.column_means();
  double all = 0.0;
  for (double c : cols) {
    out << ',' << fraction(c);
    all += c;
  }
  out << ',' << fraction(cols.empty() ? 0.0 : all / static_cast<double>(cols.size())) << '\n';
}

void write_profile_csv(std::ostream& out, const Profile& p) {
  out << "budget";
  for (const auto& c : p.curves) out << ',' << variant_name(c.variant) << '/' << short_name(c.surrogate);
  out << '\n';
  for (std::size_t i = 0; i < p.budgets.size(); ++i) {
    out << number(p.budgets[i]);
    for (const auto& c : p.curves) out << ',' << fraction(c.fraction[i]);
    out << '\n';
  }
}

void write_runs_csv(std::ostream& out, const CampaignResult& result) {
  out << "variant,surrogate,problem,status,solved,iterations,blackbox_calls,wall_time,f_final,theta_final\n";
  for (const auto& r : result.runs) {
    out << variant_name(r.variant) << ',' << short_name(r.surrogate) << ',' << r.problem << ','
        << termination_name(r.report.status) << ',' << (r.solved ? 1 : 0) << ',' << r.report.iterations << ','
        << r.report.blackbox_calls << ',' << number(r.report.wall_time) << ',' << number(r.report.f_final) << ','
        << number(r.report.theta_final) << '\n';
  }
}

std::vector<std::filesystem::path> emit_profiles(const CampaignResult& result, const std::filesystem::path& out_dir) {
  if (result.runs.empty()) throw Error("no runs to profile");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error("cannot create " + out_dir.string() + ": " + ec.message());
  std::vector<std::filesystem::path> written;
  {
    const auto path = out_dir / "success_matrix.csv";
    auto out = open_output(path);
    write_success_matrix_csv(out, success_matrix(result));
    check_written(out, path);
    written.push_back(path);
  }
  for (Metric m : kAllMetrics) {
    const auto path = out_dir / ("profile_" + std::string(metric_name(m)) + ".csv");
    auto out = open_output(path);
    write_profile_csv(out, performance_profile(result, m));
    check_written(out, path);
    written.push_back(path);
  }
  return written;
}

std::string summary_json(const CampaignResult& result) {
  const CampaignSpec& spec = result.spec;
  json j;
  j["format"] = "trf-campaign-summary";
  j["version"] = 1;
  json js;
  for (Variant v : spec.variants) js["variants"].push_back(std::string(variant_name(v)));
  for (SurrogateKind s : spec.surrogates) js["surrogates"].push_back(std::string(short_name(s)));
  js["suite"] = spec.suite;
  js["workers"] = spec.workers;
  js["seed"] = spec.seed;
  js["traces"] = spec.traces;
  js["overrides"] = spec.overrides;
  j["spec"] = js;
  j["problems"] = result.problems;

  std::map<std::string, int> by_status;
  int solved = 0;
  for (const auto& r : result.runs) {
    ++by_status[std::string(termination_name(r.report.status))];
    solved += r.solved ? 1 : 0;
  }
  j["counts"] = {{"runs", result.runs.size()}, {"solved", solved}, {"status", by_status}};

  const SuccessMatrix m = success_matrix(result);
  j["matrix"] = {{"variants", js["variants"]}, {"surrogates", js["surrogates"]}, {"cells", m.cells}};
  j["wall_time"] = result.wall_time;

  json runs = json::array();
  for (const auto& r : result.runs) {
    json x = json::array();
    for (Eigen::Index i = 0; i < r.report.x_final.size(); ++i) x.push_back(num(r.report.x_final[i]));
    runs.push_back({{"variant", std::string(variant_name(r.variant))},
                    {"surrogate", std::string(short_name(r.surrogate))},
                    {"problem", r.problem},
                    {"status", std::string(termination_name(r.report.status))},
                    {"solved", r.solved},
                    {"iterations", r.report.iterations},
                    {"blackbox_calls", r.report.blackbox_calls},
                    {"wall_time", num(r.report.wall_time)},
                    {"f_final", num(r.report.f_final)},
                    {"theta_final", num(r.report.theta_final)},
                    {"message", r.report.message},
                    {"x_final", x}});
  }
  j["runs"] = std::move(runs);
  return j.dump(1) + "\n";
}

CampaignResult parse_summary_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(std::string("summary is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("format") != "trf-campaign-summary") throw Error("not a campaign summary");
    CampaignResult r;
    const json& js = j.at("spec");
    for (const auto& v : js.at("variants")) r.spec.variants.push_back(parse_variant(v.get<std::string>()));
    for (const auto& s : js.at("surrogates")) r.spec.surrogates.push_back(parse_surrogate_kind(s.get<std::string>()));
    r.spec.suite = js.at("suite").get<std::string>();
    r.spec.workers = js.at("workers").get<int>();
    r.spec.seed = js.at("seed").get<std::uint64_t>();
    r.spec.traces = js.at("traces").get<bool>();
    r.spec.overrides = js.at("overrides").get<std::map<std::string, std::string>>();
    r.problems = j.at("problems").get<std::vector<std::string>>();
    r.wall_time = j.at("wall_time").get<double>();
    for (const auto& x : j.at("runs")) {
      RunRecord rec;
      rec.variant = parse_variant(x.at("variant").get<std::string>());
      rec.surrogate = parse_surrogate_kind(x.at("surrogate").get<std::string>());
      rec.problem = x.at("problem").get<std::string>();
      rec.solved = x.at("solved").get<bool>();
      rec.report.status = termination_from_name(x.at("status").get<std::string>());
      rec.report.iterations = x.at("iterations").get<int>();
      rec.report.blackbox_calls = x.at("blackbox_calls").get<std::uint64_t>();
      rec.report.wall_time = num_of(x.at("wall_time"));
      rec.report.f_final = num_of(x.at("f_final"));
      rec.report.theta_final = num_of(x.at("theta_final"));
      rec.report.message = x.at("message").get<std::string>();
      const json& xs = x.at("x_final");
      rec.report.x_final.resize(static_cast<Eigen::Index>(xs.size()));
      for (std::size_t i = 0; i < xs.size(); ++i) rec.report.x_final[static_cast<Eigen::Index>(i)] = num_of(xs[i]);
      r.runs.push_back(std::move(rec));
    }
    return r;
  } catch (const json::exception& e) {
    throw Error(std::string("malformed campaign summary: ") + e.what());
  }
}

std::vector<std::filesystem::path> write_campaign_outputs(const CampaignResult& result,
                                                          const std::filesystem::path& out_dir) {
  auto written = emit_profiles(result, out_dir);
  {
    const auto path = out_dir / "summary.json";
    auto out = open_output(path);
    out << summary_json(result);
    check_written(out, path);
    written.push_back(path);
  }
  {
    const auto path = out_dir / "runs.csv";
    auto out = open_output(path);
    write_runs_csv(out, result);
    check_written(out, path);
    written.push_back(path);
  }
  if (result.spec.traces) {
    const auto dir = out_dir / "traces";
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error("cannot create " + dir.string() + ": " + ec.message());
    for (const auto& r : result.runs) {
      const auto path = dir / (std::string(variant_name(r.variant)) + "_" + std::string(short_name(r.surrogate)) +
                               "_" + safe_file_part(r.problem) + ".csv");
      auto out = open_output(path);
      write_trace_csv(out, r.report.trace);
      check_written(out, path);
      written.push_back(path);
    }
  }
  return written;
}

}  // namespace trf
