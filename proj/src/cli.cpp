#include "plausmeans/cli.hpp"

#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>

#include "plausmeans/baselines.hpp"
#include "plausmeans/classic_im.hpp"
#include "plausmeans/eb_deconv.hpp"
#include "plausmeans/parallel.hpp"

namespace plausmeans {

using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double num_from(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

double parse_real(const std::string& field, std::size_t line) {
  const std::string t = trim(field);
  if (t.empty()) throw InputError("empty field", line);
  const char* first = t.data();
  if (*first == '+') ++first;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(first, t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size())
    throw InputError("not a number: '" + t + "'", line);
  if (!std::isfinite(v)) throw InputError("non-finite value: '" + t + "'", line);
  return v;
}

// Splits one CSV record; quoted fields may hold commas and doubled quotes.
std::vector<std::string> split_csv(const std::string& line, std::size_t line_no) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) throw InputError("unterminated quoted field", line_no);
  out.push_back(cur);
  return out;
}

// ---------------------------------------------------------------------------
// Output documents: provenance, summary values and a table of records.

struct Document {
  json provenance;
  json summary = json::object();
  std::vector<std::string> columns;
  std::vector<std::vector<json>> rows;
};

std::string csv_value(const json& v) {
  if (v.is_null()) return "";
  if (v.is_string()) return csv_field(v.get<std::string>());
  if (v.is_number_float()) return csv_field(v.get<double>());
  return csv_field(v.dump());
}

void write_comment_block(std::ostream& out, const std::string& prefix, const json& obj) {
  for (const auto& [key, value] : obj.items()) {
    const std::string text = value.is_string() ? value.get<std::string>() : value.dump();
    out << "# " << prefix << key << ": " << text << "\r\n";
  }
}

void write_table_csv(std::ostream& out, const std::vector<std::string>& columns,
                     const std::vector<std::vector<json>>& rows) {
  for (std::size_t c = 0; c < columns.size(); ++c) out << (c ? "," : "") << csv_field(columns[c]);
  out << "\r\n";
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << csv_value(row[c]);
    out << "\r\n";
  }
}

std::ofstream open_output(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot open output file '" + path + "'");
  return f;
}

void emit(const Document& doc, const RunConfig& config, std::ostream& fallback) {
  std::ofstream file;
  std::ostream* out = &fallback;
  if (!config.output.empty()) {
    file = open_output(config.output);
    out = &file;
  }
  if (config.format == "csv") {
    write_comment_block(*out, "provenance.", doc.provenance);
    write_comment_block(*out, "", doc.summary);
    write_table_csv(*out, doc.columns, doc.rows);
  } else {
    json j;
    j["provenance"] = doc.provenance;
    for (const auto& [key, value] : doc.summary.items()) j[key] = value;
    json records = json::array();
    for (const auto& row : doc.rows) {
      json r = json::object();
      for (std::size_t c = 0; c < doc.columns.size(); ++c) r[doc.columns[c]] = row[c];
      records.push_back(std::move(r));
    }
    j["records"] = std::move(records);
    *out << j.dump(2) << "\n";
  }
  if (!*out) throw InputError("failed writing output");
}

void emit_side_csv(const std::string& path, const json& provenance,
                   const std::vector<std::string>& columns, const std::vector<std::vector<json>>& rows) {
  std::ofstream f = open_output(path);
  write_comment_block(f, "provenance.", provenance);
  write_table_csv(f, columns, rows);
  if (!f) throw InputError("failed writing '" + path + "'");
}

json provenance(const RunConfig& c, const std::string& input_label) {
  json p;
  p["program"] = "plausmeans";
  p["version"] = kVersion;
  p["command"] = c.command;
  p["kind"] = c.kind;
  p["input"] = input_label;
  p["seed"] = c.seed;
  p["K"] = c.K;
  p["nu"] = c.nu;
  p["c_n"] = c.c_n;
  p["alpha"] = c.alpha;
  p["pi"] = c.pi;
  p["mc_samples"] = c.mc_samples;
  p["m"] = c.m;
  p["reps"] = c.reps;
  p["target"] = c.target;
  p["threads"] = worker_count();
  p["optimizer"] = {{"max_outer_iters", c.optimizer.max_outer_iters},
                    {"max_inner_iters", c.optimizer.max_inner_iters},
                    {"feasibility_tol", c.optimizer.feasibility_tol},
                    {"objective_tol", c.optimizer.objective_tol},
                    {"gradient_tol", c.optimizer.gradient_tol},
                    {"starts", c.optimizer.starts},
                    {"seed", c.optimizer.seed}};
  return p;
}

std::string input_label(const RunConfig& c) { return c.input.empty() ? "stdin" : c.input; }

InputData load(const RunConfig& c) {
  if (!c.input.empty()) return read_input(c.input);
  return parse_input(std::cin);
}

Vector reference_estimate(const Vector& x) {
  if (x.size() >= 4) return efron_morris(x).values;
  return mle(x).values;
}

void require_eb(const RunConfig& c) {
  if (c.kind != "eb") throw InvalidParameter(c.command + " is available for the eb kind only");
}

// ---------------------------------------------------------------------------
// Commands

void cmd_estimate(const RunConfig& c, std::ostream& out) {
  const InputData data = load(c);
  const Index n = data.x.size();
  const BoundarySpec spec(n, c.c_n, c.nu);
  Document doc;
  doc.provenance = provenance(c, input_label(c));
  if (c.kind == "classic") {
    const SortedSample sample = SortedSample::from(data.x);
    const ClassicFit fit = classic_mpe_fit(sample, spec, c.optimizer);
    const Vector est = partial_conditional_estimate(fit.theta_hat, data.x);
    doc.summary["b_at_fit"] = num(fit.b_at_fit);
    doc.summary["b_at_start"] = num(fit.b_at_start);
    doc.summary["converged"] = fit.converged;
    doc.columns = {"index", "x", "estimate"};
    if (data.scaled()) doc.columns.insert(doc.columns.end(), {"y", "s", "mu_estimate"});
    for (Index i = 0; i < n; ++i) {
      std::vector<json> row{i + 1, num(data.x[i]), num(est[i])};
      if (data.scaled())
        row.insert(row.end(), {num((*data.y)[i]), num((*data.s)[i]), num((*data.s)[i] * est[i])});
      doc.rows.push_back(std::move(row));
    }
  } else {
    const SortedSample sample = SortedSample::from(data.x);
    const DeconvolutionModel model(make_grid(sample, c.K), sample, spec);
    const MpeEstimate est = mpe_estimate(model, c.optimizer);
    doc.summary["b_min"] = num(est.fit.b_min);
    doc.summary["b_start"] = num(est.fit.b_start);
    doc.summary["converged"] = est.fit.converged;
    doc.summary["failures"] = est.failures;
    doc.columns = {"index", "x", "estimate_lower", "estimate_upper", "estimate_mid"};
    if (data.scaled())
      doc.columns.insert(doc.columns.end(), {"y", "s", "mu_lower", "mu_upper", "mu_mid"});
    for (Index i = 0; i < n; ++i) {
      std::vector<json> row{i + 1, num(data.x[i]), num(est.lower[i]), num(est.upper[i]),
                            num(est.mid[i])};
      if (data.scaled()) {
        const double s = (*data.s)[i];
        row.insert(row.end(), {num((*data.y)[i]), num(s), num(s * est.lower[i]),
                               num(s * est.upper[i]), num(s * est.mid[i])});
      }
      doc.rows.push_back(std::move(row));
    }
  }
  emit(doc, c, out);
}

void write_plot(const RunConfig& c, const json& prov, const Vector& x, const MpeEstimate& est,
                const IntervalSet& set) {
  if (c.plot_output.empty()) return;
  const Vector ref = reference_estimate(x);
  std::vector<std::vector<json>> rows;
  for (Index i = 0; i < x.size(); ++i)
    rows.push_back({i + 1, num(x[i]), num(est.lower[i]), num(est.upper[i]), num(set.lower[i]),
                    num(set.upper[i]), num(ref[i])});
  emit_side_csv(c.plot_output, prov,
                {"index", "x", "lower_mean_curve", "upper_mean_curve", "ci_lower", "ci_upper",
                 "reference_estimate"},
                rows);
}

void cmd_intervals(const RunConfig& c, std::ostream& out) {
  require_eb(c);
  const InputData data = load(c);
  const Index n = data.x.size();
  const BoundarySpec spec(n, c.c_n, c.nu);
  const SortedSample sample = SortedSample::from(data.x);
  const DeconvolutionModel model(make_grid(sample, c.K), sample, spec);
  const MpeEstimate est = mpe_estimate(model, c.optimizer);
  RandomStream rng(c.seed);
  const IntervalSet set =
      plausibility_intervals(model, est.fit, c.pi, c.alpha, c.optimizer, rng, c.mc_samples);
  const Diagnostic diag = within_experiment_diagnostic(set, data.x, c.alpha);

  Document doc;
  doc.provenance = provenance(c, input_label(c));
  doc.summary["threshold"] = num(set.threshold);
  doc.summary["b_min"] = num(est.fit.b_min);
  doc.summary["empty_region"] = set.empty_region;
  doc.summary["diagnostic"] = {{"count_outside", diag.count_outside}, {"expected", diag.expected}};
  doc.columns = {"index", "x", "lower", "upper", "alpha", "pi", "fallback"};
  if (data.scaled()) doc.columns.insert(doc.columns.end(), {"mu_lower", "mu_upper"});
  for (Index i = 0; i < n; ++i) {
    std::vector<json> row{i + 1,          num(data.x[i]), num(set.lower[i]), num(set.upper[i]),
                          num(set.alpha), num(set.pi),    static_cast<bool>(set.fallback[static_cast<std::size_t>(i)])};
    if (data.scaled())
      row.insert(row.end(), {num((*data.s)[i] * set.lower[i]), num((*data.s)[i] * set.upper[i])});
    doc.rows.push_back(std::move(row));
  }
  emit(doc, c, out);
  write_plot(c, doc.provenance, data.x, est, set);
}

json ladder_json(const AdaptiveResult& res) {
  json rows = json::array();
  for (const auto& r : res.ladder)
    rows.push_back({{"s", r.s},
                    {"level", num(r.level)},
                    {"threshold", num(r.threshold)},
                    {"coverage", num(r.coverage)},
                    {"mean_length", num(r.mean_length)}});
  return rows;
}

void write_ladder(const RunConfig& c, const json& prov, const AdaptiveResult& res) {
  if (c.ladder_output.empty()) return;
  std::vector<std::vector<json>> rows;
  for (const auto& r : res.ladder)
    rows.push_back({r.s, num(r.level), num(r.threshold), num(r.coverage), num(r.mean_length)});
  emit_side_csv(c.ladder_output, prov, {"s", "level", "threshold", "coverage", "mean_length"}, rows);
}

void adaptive_summary(Document& doc, const AdaptiveResult& res) {
  const auto& chosen = res.ladder[static_cast<std::size_t>(res.s_star - 1)];
  doc.summary["s_star"] = res.s_star;
  doc.summary["chosen_level"] = num(chosen.level);
  doc.summary["suggested_coverage"] = num(chosen.coverage);
  doc.summary["calibration_failed"] = res.calibration_failed;
  doc.summary["alpha"] = num(res.alpha);
  doc.summary["failed_replicates"] = res.failed_replicates;
  doc.summary["b_min"] = num(res.estimate.fit.b_min);
  doc.summary["ladder"] = ladder_json(res);
}

void cmd_adaptive(const RunConfig& c, std::ostream& out) {
  require_eb(c);
  const InputData data = load(c);
  const Index n = data.x.size();
  const BoundarySpec spec(n, c.c_n, c.nu);
  const SortedSample sample = SortedSample::from(data.x);
  const DeconvolutionModel model(make_grid(sample, c.K), sample, spec);
  RandomStream rng(c.seed);
  const AdaptiveResult res = adaptive_adjust(model, c.target, c.m, c.reps, rng, c.optimizer, c.mc_samples);

  Document doc;
  doc.provenance = provenance(c, input_label(c));
  adaptive_summary(doc, res);
  doc.columns = {"index", "x", "estimate_mid", "lower", "upper"};
  if (data.scaled()) doc.columns.insert(doc.columns.end(), {"mu_mid", "mu_lower", "mu_upper"});
  for (Index i = 0; i < n; ++i) {
    std::vector<json> row{i + 1, num(data.x[i]), num(res.estimate.mid[i]),
                          num(res.intervals.lower[i]), num(res.intervals.upper[i])};
    if (data.scaled()) {
      const double s = (*data.s)[i];
      row.insert(row.end(), {num(s * res.estimate.mid[i]), num(s * res.intervals.lower[i]),
                             num(s * res.intervals.upper[i])});
    }
    doc.rows.push_back(std::move(row));
  }
  emit(doc, c, out);
  write_ladder(c, doc.provenance, res);
  write_plot(c, doc.provenance, data.x, res.estimate, res.intervals);
}

void cmd_simulate(const RunConfig& c, std::ostream& out) {
  RunConfig run = c;
  if (run.paper_scale) {
    run.K = 1000;
    run.M = 200;
  }
  const Scenario scenario = Scenario::named(run.scenario, run.n);
  ReplicationReport report;
  if (run.study == "mse") {
    std::vector<Method> methods;
    const std::vector<std::string> names =
        run.methods.empty() ? std::vector<std::string>{"mle", "james_stein", "james_stein_positive_part",
                                                       "efron_morris", "eb_im", "classic_im"}
                            : run.methods;
    for (const auto& m : names) methods.push_back(parse_method(m));
    report = run_mse_study(scenario, methods, run.M, run.K, run.seed, run.optimizer, run.c_n, run.nu);
  } else {
    std::vector<CoverageLevel> levels;
    if (run.levels.empty()) {
      levels = CoverageLevel::table_rows();
    } else {
      levels.push_back(CoverageLevel::mpe());
      for (double l : run.levels) levels.push_back(CoverageLevel::nominal_level(l));
    }
    report = run_coverage_study(scenario, levels, run.M, run.K, run.seed, run.optimizer,
                                run.mc_samples, run.c_n, run.nu);
  }

  Document doc;
  doc.provenance = provenance(run, "simulated");
  const json j = report_to_json(report);
  for (const auto& [key, value] : j.items())
    if (key != "methods" && key != "levels") doc.summary[key] = value;
  if (report.study == "mse") {
    doc.columns = {"method", "mse", "se", "used", "excluded"};
    for (const auto& m : report.methods)
      doc.rows.push_back({m.method, num(m.mse), num(m.se), m.used, m.excluded});
  } else {
    doc.columns = {"level", "nominal", "plausibility", "coverage", "coverage_se", "mean_length", "used"};
    for (const auto& l : report.levels)
      doc.rows.push_back({l.label, num(l.nominal), num(l.plausibility), num(l.coverage),
                          num(l.coverage_se), num(l.mean_length), l.used});
  }
  emit(doc, run, out);
}

void cmd_real_data(const RunConfig& c, std::ostream& out) {
  require_eb(c);
  const InputData data = c.input.empty() ? rubin_data() : read_input(c.input);
  const Index n = data.x.size();
  const Vector& x = data.x;
  const Vector s = data.scaled() ? *data.s : Vector::Ones(n);
  const double S2 = mean_removed_statistic(x);
  const double cdf = chi_square_cdf(S2, static_cast<double>(n - 1));

  const BoundarySpec spec(n, c.c_n, c.nu);
  const SortedSample sample = SortedSample::from(x);
  const DeconvolutionModel model(make_grid(sample, c.K), sample, spec);
  RandomStream rng(c.seed);
  const AdaptiveResult res = adaptive_adjust(model, c.target, c.m, c.reps, rng, c.optimizer, c.mc_samples);
  const Vector em = reference_estimate(x);

  Document doc;
  doc.provenance = provenance(c, c.input.empty() ? "bundled SAT coaching data" : c.input);
  doc.summary["n"] = n;
  doc.summary["S2"] = num(S2);
  doc.summary["chi_square_dof"] = n - 1;
  doc.summary["chi_square_cdf"] = num(cdf);
  doc.summary["data_checksum"] = data_checksum(data);
  adaptive_summary(doc, res);
  doc.columns = {"index",     "y",        "s",          "x",         "eb_lower",     "eb_upper",
                 "eb_mid",    "ci_lower", "ci_upper",   "efron_morris", "mu_eb_mid", "mu_ci_lower",
                 "mu_ci_upper", "mu_efron_morris"};
  for (Index i = 0; i < n; ++i) {
    const double yi = data.y ? (*data.y)[i] : x[i];
    doc.rows.push_back({i + 1, num(yi), num(s[i]), num(x[i]), num(res.estimate.lower[i]),
                        num(res.estimate.upper[i]), num(res.estimate.mid[i]),
                        num(res.intervals.lower[i]), num(res.intervals.upper[i]), num(em[i]),
                        num(s[i] * res.estimate.mid[i]), num(s[i] * res.intervals.lower[i]),
                        num(s[i] * res.intervals.upper[i]), num(s[i] * em[i])});
  }
  emit(doc, c, out);
  write_ladder(c, doc.provenance, res);
  write_plot(c, doc.provenance, x, res.estimate, res.intervals);
}

}  // namespace

// ---------------------------------------------------------------------------

void RunConfig::validate() const {
  static const std::vector<std::string> commands{"estimate", "intervals", "adaptive", "simulate",
                                                 "real-data"};
  if (std::find(commands.begin(), commands.end(), command) == commands.end())
    throw InvalidParameter("unknown command '" + command + "'");
  if (kind != "eb" && kind != "classic") throw InvalidParameter("kind must be eb or classic");
  if (format != "json" && format != "csv") throw InvalidParameter("format must be json or csv");
  if (K < 2) throw InvalidParameter("K must be at least 2");
  if (!(nu >= 0.0 && nu <= 2.0)) throw InvalidParameter("nu must lie in [0, 2]");
  if (!(c_n > 0.0)) throw InvalidParameter("c_n must be positive");
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidParameter("alpha must lie in (0, 1)");
  if (!(pi > 0.0 && pi < 1.0)) throw InvalidParameter("pi must lie in (0, 1)");
  if (mc_samples < 100) throw InvalidParameter("mc-samples must be at least 100");
  if (m < 2) throw InvalidParameter("m must be at least 2");
  if (reps < 1) throw InvalidParameter("reps must be positive");
  if (!(target > 0.0 && target < 1.0)) throw InvalidParameter("target must lie in (0, 1)");
  if (study != "mse" && study != "coverage") throw InvalidParameter("study must be mse or coverage");
  if (M < 2) throw InvalidParameter("M must be at least 2");
  if (n < 1) throw InvalidParameter("n must be positive");
  optimizer.validate();
}

InputData parse_input(std::istream& in) {
  std::string raw;
  std::size_t line_no = 0;
  bool header_seen = false, scaled = false;
  std::vector<double> xs, ys, ss;
  while (std::getline(in, raw)) {
    ++line_no;
    if (line_no == 1 && raw.size() >= 3 && static_cast<unsigned char>(raw[0]) == 0xEF &&
        static_cast<unsigned char>(raw[1]) == 0xBB && static_cast<unsigned char>(raw[2]) == 0xBF)
      raw.erase(0, 3);
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    const auto fields = split_csv(line, line_no);
    if (!header_seen && xs.empty()) {
      header_seen = true;
      std::vector<std::string> names;
      for (const auto& f : fields) names.push_back(lower(trim(f)));
      if (names == std::vector<std::string>{"y", "s"}) {
        scaled = true;
        continue;
      }
      if (names == std::vector<std::string>{"x"}) continue;
    }
    if (scaled) {
      if (fields.size() != 2) throw InputError("expected two fields 'y,s'", line_no);
      const double y = parse_real(fields[0], line_no);
      const double s = parse_real(fields[1], line_no);
      if (!(s > 0.0)) throw InputError("standard error s must be positive", line_no);
      ys.push_back(y);
      ss.push_back(s);
      xs.push_back(y / s);
    } else {
      if (fields.size() != 1) throw InputError("expected one value per line", line_no);
      xs.push_back(parse_real(fields[0], line_no));
    }
  }
  if (in.bad()) throw InputError("read failure");
  if (xs.empty()) throw InputError("no observations");
  InputData d;
  d.x = Eigen::Map<const Vector>(xs.data(), static_cast<Index>(xs.size()));
  if (scaled) {
    d.y = Eigen::Map<const Vector>(ys.data(), static_cast<Index>(ys.size()));
    d.s = Eigen::Map<const Vector>(ss.data(), static_cast<Index>(ss.size()));
  }
  return d;
}

InputData read_input(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InputError("cannot open input file '" + path + "'");
  return parse_input(f);
}

InputData rubin_data() {
  InputData d;
  d.y = Vector(8);
  d.s = Vector(8);
  *d.y << 28.39, 7.94, -2.75, 6.82, -0.64, 0.63, 18.01, 12.16;
  *d.s << 14.9, 10.2, 16.3, 11.0, 9.4, 11.4, 10.4, 17.6;
  d.x = d.y->cwiseQuotient(*d.s);
  return d;
}

std::uint64_t data_checksum(const InputData& data) {
  // FNV-1a over the IEEE-754 bit patterns, little-endian, x then y then s.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const Vector& v) {
    for (Index i = 0; i < v.size(); ++i) {
      std::uint64_t bits = 0;
      const double d = v[i];
      std::memcpy(&bits, &d, sizeof bits);
      for (int b = 0; b < 8; ++b) {
        h ^= (bits >> (8 * b)) & 0xffU;
        h *= 0x100000001b3ULL;
      }
    }
  };
  mix(data.x);
  if (data.y) mix(*data.y);
  if (data.s) mix(*data.s);
  return h;
}

std::string csv_field(const std::string& value) {
  if (value.find_first_of(",\"\r\n") == std::string::npos) return value;
  std::string out = "\"";
  for (char c : value) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string csv_field(double value) {
  if (!std::isfinite(value)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

json report_to_json(const ReplicationReport& r) {
  json j;
  j["study"] = r.study;
  j["scenario"] = {{"name", r.scenario.name()}, {"n", r.scenario.n}};
  j["M"] = r.M;
  j["K"] = r.K;
  j["seed"] = r.seed;
  j["alpha"] = num(r.alpha);
  j["excluded"] = r.excluded;
  j["exclusion_flag"] = r.exclusion_flag;
  j["runtime_seconds"] = num(r.runtime_seconds);
  j["threads"] = r.threads;
  json methods = json::array();
  for (const auto& m : r.methods) {
    json per = json::array();
    for (double v : m.per_replicate) per.push_back(num(v));
    methods.push_back({{"method", m.method},
                       {"mse", num(m.mse)},
                       {"se", num(m.se)},
                       {"used", m.used},
                       {"excluded", m.excluded},
                       {"per_replicate", per}});
  }
  j["methods"] = methods;
  json levels = json::array();
  for (const auto& l : r.levels) {
    json per = json::array();
    for (double v : l.per_replicate) per.push_back(num(v));
    levels.push_back({{"label", l.label},
                      {"nominal", num(l.nominal)},
                      {"plausibility", num(l.plausibility)},
                      {"coverage", num(l.coverage)},
                      {"coverage_se", num(l.coverage_se)},
                      {"mean_length", num(l.mean_length)},
                      {"used", l.used},
                      {"per_replicate", per}});
  }
  j["levels"] = levels;
  return j;
}

ReplicationReport report_from_json(const json& j) {
  try {
    ReplicationReport r;
    r.study = j.at("study").get<std::string>();
    r.scenario = Scenario::named(j.at("scenario").at("name").get<std::string>(),
                                 j.at("scenario").at("n").get<Index>());
    r.M = j.at("M").get<int>();
    r.K = j.at("K").get<Index>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.alpha = num_from(j.at("alpha"));
    r.excluded = j.at("excluded").get<int>();
    r.exclusion_flag = j.at("exclusion_flag").get<bool>();
    r.runtime_seconds = num_from(j.at("runtime_seconds"));
    r.threads = j.at("threads").get<unsigned>();
    for (const auto& m : j.at("methods")) {
      MethodSummary s{m.at("method").get<std::string>(), num_from(m.at("mse")), num_from(m.at("se")),
                      m.at("used").get<int>(), m.at("excluded").get<int>(), {}};
      for (const auto& v : m.at("per_replicate")) s.per_replicate.push_back(num_from(v));
      r.methods.push_back(std::move(s));
    }
    for (const auto& l : j.at("levels")) {
      LevelSummary s;
      s.label = l.at("label").get<std::string>();
      s.nominal = num_from(l.at("nominal"));
      s.plausibility = num_from(l.at("plausibility"));
      s.coverage = num_from(l.at("coverage"));
      s.coverage_se = num_from(l.at("coverage_se"));
      s.mean_length = num_from(l.at("mean_length"));
      s.used = l.at("used").get<int>();
      for (const auto& v : l.at("per_replicate")) s.per_replicate.push_back(num_from(v));
      r.levels.push_back(std::move(s));
    }
    return r;
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed report: ") + e.what());
  }
}

int report_failure(std::exception_ptr error, std::ostream& err) {
  try {
    std::rethrow_exception(error);
  } catch (const InputError& e) {
    err << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const InvalidParameter& e) {
    err << "invalid parameter: " << e.what() << "\n";
    return kExitInput;
  } catch (const DimensionMismatch& e) {
    err << "invalid input: " << e.what() << "\n";
    return kExitInput;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (...) {
    err << "error: unknown failure\n";
    return 1;
  }
}

int run_command(const RunConfig& config, std::ostream& err) {
  try {
    config.validate();
    if (config.command == "estimate") cmd_estimate(config, std::cout);
    else if (config.command == "intervals") cmd_intervals(config, std::cout);
    else if (config.command == "adaptive") cmd_adaptive(config, std::cout);
    else if (config.command == "simulate") cmd_simulate(config, std::cout);
    else cmd_real_data(config, std::cout);
    return kExitOk;
  } catch (...) {
    return report_failure(std::current_exception(), err);
  }
}

}  // namespace plausmeans
