#include "messy/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "messy/error.hpp"

namespace messy {

using nlohmann::json;

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(',', start);
    cells.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return cells;
}

bool parse_number(std::string_view s, double& v) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  return ec == std::errc() && ptr == s.data() + s.size();
}

json interval_json(const Interval& i) {
  json a = json::array();
  a.push_back(std::isfinite(i.lo) ? json(i.lo) : json(nullptr));
  a.push_back(std::isfinite(i.hi) ? json(i.hi) : json(nullptr));
  return a;
}

Interval interval_from(const json& j) {
  const double inf = std::numeric_limits<double>::infinity();
  if (!j.is_array() || j.size() != 2) throw ParseError(0, "interval must be [lo, hi]");
  return {j[0].is_null() ? -inf : j[0].get<double>(), j[1].is_null() ? inf : j[1].get<double>()};
}

json box_json(const Box& b) {
  json a = json::array();
  for (const auto& i : b) a.push_back(interval_json(i));
  return a;
}

Box box_from(const json& j) {
  Box b;
  for (const auto& i : j) b.push_back(interval_from(i));
  return b;
}

json vec_json(const Eigen::VectorXd& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

Eigen::VectorXd vec_from(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json density_json(const MessyDensity& d) {
  json out;
  const int dim = d.dim();
  out["dim"] = dim;
  out["mode"] = d.mode() == Mode::P ? "P" : "S";
  out["kl_score"] = d.kl_score();
  out["expression"] = density_expression(d);
  json levels = json::array();
  for (const auto& lv : d.levels()) {
    json l;
    l["exponent"] = render(lv.exponent(), dim);
    json basis = json::array();
    for (const auto& e : lv.basis()) basis.push_back(render(e, dim, -1));
    l["basis"] = basis;
    l["lambda"] = vec_json(lv.lambda());
    l["logZ"] = lv.log_z();
    l["support"] = box_json(lv.support());
    l["mass"] = lv.mass();
    json ref;
    ref["mean"] = vec_json(lv.reference().mean);
    json cov = json::array();
    for (Eigen::Index i = 0; i < lv.reference().cov.rows(); ++i) {
      cov.push_back(vec_json(lv.reference().cov.row(i).transpose()));
    }
    ref["cov"] = cov;
    ref["window"] = box_json(lv.reference().window);
    l["reference"] = ref;
    levels.push_back(l);
  }
  out["levels"] = levels;
  return out;
}

json trace_json(const LevelTrace& t, int dim) {
  json levels = json::array();
  for (const auto& lv : t.levels) {
    json l;
    json basis = json::array();
    for (const auto& e : lv.basis) basis.push_back(render(e, dim));
    l["basis"] = basis;
    l["lambda"] = vec_json(lv.lambda);
    l["mass"] = lv.mass;
    l["samples_before"] = lv.samples_before;
    l["masked"] = lv.masked;
    l["cond_raw"] = lv.cond_raw;
    l["cond_orth"] = lv.cond_orth;
    l["redraws"] = lv.redraws;
    levels.push_back(l);
  }
  return {{"levels", levels}, {"notes", t.notes}};
}

// JSON has no infinity; map non-finite numbers to null.
json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

SampleSet parse_csv(std::string_view text, std::string source) {
  if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
  std::vector<double> values;
  std::size_t cols = 0, rows = 0, line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t end = text.find('\n', pos);
    const std::string_view line = trim(text.substr(pos, end == std::string_view::npos ? end : end - pos));
    pos = end == std::string_view::npos ? text.size() : end + 1;
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split(line);
    std::vector<double> row(cells.size());
    bool numeric = true;
    std::size_t bad = 0;
    for (std::size_t c = 0; c < cells.size() && numeric; ++c) {
      numeric = parse_number(cells[c], row[c]) && std::isfinite(row[c]);
      if (!numeric) bad = c;
    }
    if (!numeric) {
      if (rows == 0 && cols == 0) {  // header
        cols = cells.size();
        continue;
      }
      throw ParseError(line_no, "line " + std::to_string(line_no) + ", column " +
                                    std::to_string(bad + 1) + ": '" + std::string(cells[bad]) +
                                    "' is not a finite number");
    }
    if (cols == 0) cols = cells.size();
    if (cells.size() != cols) {
      throw ParseError(line_no, "line " + std::to_string(line_no) + ": expected " +
                                    std::to_string(cols) + " columns, found " +
                                    std::to_string(cells.size()));
    }
    values.insert(values.end(), row.begin(), row.end());
    ++rows;
  }
  if (rows == 0) throw ParseError(line_no ? line_no : 1, "no samples in input");
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = values[r * cols + c];
    }
  }
  return SampleSet(std::move(x), std::move(source));
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read error on '" + path + "'");
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << text;
  out.flush();
  if (!out) throw IoError("write error on '" + path + "'");
}

SampleSet read_csv(const std::string& path) { return parse_csv(read_text(path), path); }

std::string format_csv(const Eigen::MatrixXd& x) {
  std::string out;
  char buf[32];
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      if (j) out += ',';
      const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x(i, j));
      out.append(buf, ptr);
    }
    out += '\n';
  }
  return out;
}

void write_csv(const std::string& path, const Eigen::MatrixXd& x) { write_text(path, format_csv(x)); }

std::string density_to_json(const MessyDensity& d) { return density_json(d).dump(2) + "\n"; }

MessyDensity density_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(0, std::string("invalid JSON: ") + e.what());
  }
  if (j.contains("density")) j = j["density"];
  try {
    const int dim = j.at("dim").get<int>();
    std::vector<LevelDensity> levels;
    for (const auto& l : j.at("levels")) {
      std::vector<Expr> basis;
      for (const auto& b : l.at("basis")) basis.push_back(parse_expr(b.get<std::string>()));
      Reference ref;
      ref.mean = vec_from(l.at("reference").at("mean"));
      const auto& cov = l.at("reference").at("cov");
      ref.cov.resize(dim, dim);
      for (int r = 0; r < dim; ++r) ref.cov.row(r) = vec_from(cov.at(static_cast<std::size_t>(r))).transpose();
      ref.window = box_from(l.at("reference").at("window"));
      Box support = box_from(l.at("support"));
      if (static_cast<int>(support.size()) != dim) throw ParseError(0, "support dimension mismatch");
      levels.emplace_back(std::move(basis), vec_from(l.at("lambda")), std::move(support),
                          l.at("mass").get<double>(), std::move(ref), l.at("logZ").get<double>());
    }
    if (levels.empty()) throw ParseError(0, "density has no levels");
    MessyDensity d(std::move(levels), j.value("mode", std::string("P")) == "S" ? Mode::S : Mode::P);
    if (j.contains("kl_score") && j["kl_score"].is_number()) d.set_kl_score(j["kl_score"].get<double>());
    return d;
  } catch (const json::exception& e) {
    throw ParseError(0, std::string("malformed density JSON: ") + e.what());
  }
}

std::string estimate_to_json(const MessyFit& fit, const SearchConfig& cfg, std::size_t n,
                             bool timing) {
  json out;
  const int dim = fit.messy_s.dim();
  out["density"] = density_json(fit.messy_s);
  json c;
  c["mode"] = cfg.mode == Mode::P ? "P" : "S";
  c["nm"] = cfg.nm;
  c["nb_choices"] = cfg.nb_choices;
  c["iters"] = cfg.iters;
  c["seed"] = cfg.seed;
  c["max_levels"] = cfg.max_levels;
  c["bounds"] = cfg.bounds.empty() ? json(nullptr) : box_json(cfg.bounds);
  c["samples"] = n;
  out["config"] = c;
  out["best_iteration"] = fit.best;
  json its = json::array();
  for (const auto& it : fit.iterations) {
    json i;
    i["index"] = it.index;
    i["ok"] = it.ok;
    if (!it.ok) i["error"] = it.error;
    i["kl"] = num(it.kl);
    i["kl_before_mxed"] = num(it.kl_before_mxed);
    i["zero_support_hits"] = it.zero_support_hits;
    i["mxed_applied"] = it.mxed_applied;
    if (it.mxed_applied) {
      i["mxed_iterations"] = it.mxed_iterations;
      i["mxed_rounds"] = it.mxed_rounds;
      i["mxed_order"] = it.mxed_order;
      i["mxed_gnorm"] = it.mxed_gnorm;
      i["mxed_ess"] = it.mxed_ess;
    }
    if (!it.mxed_note.empty()) i["mxed_note"] = it.mxed_note;
    if (!it.draw_warning.empty()) i["draw_warning"] = it.draw_warning;
    i["nb"] = it.nb;
    i["cond_raw"] = num(it.cond);
    if (it.density) i["expression"] = density_expression(*it.density);
    i["trace"] = trace_json(it.trace, dim);
    if (timing) i["seconds"] = it.seconds;
    its.push_back(i);
  }
  out["iterations"] = its;
  return out.dump(2) + "\n";
}

std::string report_to_json(const BenchmarkReport& r, bool timing) {
  json out;
  out["case"] = r.info.id;
  out["dim"] = r.info.dim;
  out["bounds"] = r.info.bounded ? box_json(r.info.bounds) : json(nullptr);
  out["n"] = r.config.n_list;
  out["methods"] = r.config.methods;
  out["replicates"] = r.config.replicates;
  out["seed"] = r.config.seed;
  out["nm"] = r.config.nm > 0 ? r.config.nm : r.info.default_nm;
  out["iters"] = r.config.iters;
  json reps = json::array();
  for (const auto& rp : r.replicates) {
    json j;
    j["n"] = rp.n;
    j["replicate"] = rp.replicate;
    j["seed"] = rp.seed;
    json runs = json::array();
    for (const auto& run : rp.runs) {
      json m;
      m["method"] = run.method;
      m["ok"] = run.ok;
      if (!run.ok) {
        m["error"] = run.error;
        runs.push_back(m);
        continue;
      }
      m["kl"] = num(run.kl);
      m["moment_err_1_4"] = num(run.moment_err_low);
      m["moment_err_5_6"] = num(run.moment_err_high);
      if (timing) m["seconds"] = run.seconds;
      if (!run.cond.empty()) {
        json cj = json::array();
        for (double c : run.cond) cj.push_back(num(c));
        m["cond_raw"] = cj;
      }
      if (!run.masses.empty()) {
        m["masses"] = run.masses;
        m["mass_sum"] = run.mass_sum;
        m["exponents"] = run.exponents;
        m["integral"] = num(run.integral);
      }
      if (run.mxed_iterations >= 0) {
        m["mxed_iterations"] = run.mxed_iterations;
        m["mxed_gnorm"] = run.mxed_gnorm;
      }
      m["expression"] = run.expression;
      runs.push_back(m);
    }
    j["runs"] = runs;
    reps.push_back(j);
  }
  out["runs"] = reps;
  json sum = json::array();
  for (const auto& s : r.summary) {
    json j;
    j["n"] = s.n;
    j["method"] = s.method;
    j["ok"] = s.ok;
    j["failed"] = s.failed;
    j["kl"] = {{"mean", num(s.kl_mean)}, {"se", num(s.kl_se)}};
    j["moment_err_1_4"] = {{"mean", num(s.err_low_mean)}, {"se", num(s.err_low_se)}};
    j["moment_err_5_6"] = {{"mean", num(s.err_high_mean)}, {"se", num(s.err_high_se)}};
    if (timing) j["seconds"] = {{"mean", s.seconds_mean}, {"se", s.seconds_se}};
    sum.push_back(j);
  }
  out["summary"] = sum;
  return out.dump(2) + "\n";
}

std::string scaling_to_json(const ScalingReport& r, bool timing) {
  json out;
  json pts = json::array();
  for (const auto& p : r.points) {
    json j{{"dim", p.dim}, {"n", p.n}};
    if (timing) j["seconds"] = p.seconds;
    pts.push_back(j);
  }
  out["points"] = pts;
  if (timing) {
    json sl = json::array();
    for (const auto& [d, s] : r.slopes) sl.push_back({{"dim", d}, {"slope", s}});
    out["slopes"] = sl;
    out["total_seconds"] = r.total_seconds;
  }
  return out.dump(2) + "\n";
}

}  // namespace messy
