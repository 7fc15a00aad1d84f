#pragma once

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "lpme/augment.hpp"
#include "lpme/lpme.hpp"
#include "lpme/sim.hpp"
#include "lpme/version.hpp"

namespace lpme {

/// Lossless text encoding of a double (hexadecimal significand).
inline std::string hex_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%a", v);
  return buf;
}

inline double parse_double(const std::string& tok, const std::string& context) {
  const char* begin = tok.c_str();
  char* end = nullptr;
  double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0')
    throw std::invalid_argument(context + ": malformed number '" + tok + "'");
  return v;
}

/// Shortest round-trip decimal for plot-friendly files.
inline std::string dec_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// Standard comment header carried by every output file: version, command
/// line, seed.
inline std::string file_header(const std::string& file_kind, const std::string& command_line,
                               std::uint64_t seed) {
  std::ostringstream os;
  os << "# lpme " << file_kind << " v1\n";
  os << "# tool: lpme " << version_string << "\n";
  os << "# command: " << command_line << "\n";
  os << "# seed: " << seed << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// cloud files: lines of `t x1 .. xD [truth_flag]`, `#` comments
// ---------------------------------------------------------------------------

struct CloudFile {
  LongitudinalCloud observed;
  LongitudinalCloud truth;  // empty times when the file carries no truth rows
  int declared_d = 0;       // from the `# d:` header comment, 0 when absent
  bool has_truth = false;
};

inline void write_cloud(std::ostream& os, const LongitudinalCloud& cloud, const std::string& header,
                        const LongitudinalCloud* truth = nullptr) {
  os << header;
  os << "# d: " << cloud.d << "\n";
  os << "# columns: t";
  for (int k = 1; k <= cloud.D(); ++k) os << " x" << k;
  if (truth) os << " truth";
  os << "\n";
  auto emit = [&](const LongitudinalCloud& c, int flag) {
    for (int t = 0; t < c.T(); ++t) {
      const MatrixXd& pts = c.clouds[static_cast<size_t>(t)];
      for (int i = 0; i < pts.rows(); ++i) {
        os << dec_double(c.times[t]);
        for (int k = 0; k < pts.cols(); ++k) os << ' ' << dec_double(pts(i, k));
        if (truth) os << ' ' << flag;
        os << '\n';
      }
    }
  };
  emit(cloud, 0);
  if (truth) emit(*truth, 1);
}

inline void write_cloud_file(const std::string& path, const LongitudinalCloud& cloud,
                             const std::string& header, const LongitudinalCloud* truth = nullptr) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  write_cloud(os, cloud, header, truth);
}

namespace detail {

inline LongitudinalCloud group_rows(const std::vector<std::pair<double, VectorXd>>& rows, int d) {
  std::map<double, std::vector<VectorXd>> by_time;
  for (const auto& [t, x] : rows) by_time[t].push_back(x);
  LongitudinalCloud c;
  c.d = d > 0 ? d : 1;
  c.times.resize(static_cast<Eigen::Index>(by_time.size()));
  int ti = 0;
  for (const auto& [t, pts] : by_time) {
    c.times[ti] = t;
    MatrixXd m(static_cast<Eigen::Index>(pts.size()), pts.front().size());
    for (size_t i = 0; i < pts.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = pts[i].transpose();
    c.clouds.push_back(m);
    ++ti;
  }
  return c;
}

}  // namespace detail

inline CloudFile read_cloud_file(const std::string& path, bool allow_empty = false) {
  std::ifstream is(path);
  if (!is) throw std::invalid_argument("cannot open cloud file: " + path);
  CloudFile out;
  std::vector<std::pair<double, VectorXd>> observed, truth;
  std::string line;
  int line_no = 0;
  int width = -1;
  bool truth_column = false;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream hs(line.substr(1));
      std::string key;
      hs >> key;
      if (key == "d:") hs >> out.declared_d;
      if (key == "columns:") {
        std::string col, last;
        while (hs >> col) last = col;
        truth_column = (last == "truth");
      }
      continue;
    }
    std::istringstream ls(line);
    std::vector<std::string> toks;
    std::string tok;
    while (ls >> tok) toks.push_back(tok);
    if (toks.empty()) continue;
    const std::string ctx = path + " line " + std::to_string(line_no);
    int ncoord = static_cast<int>(toks.size()) - 1 - (truth_column ? 1 : 0);
    if (ncoord < 1) throw std::invalid_argument(ctx + ": too few columns");
    if (width < 0) width = ncoord;
    if (ncoord != width) throw std::invalid_argument(ctx + ": inconsistent column count");
    double t = parse_double(toks[0], ctx);
    VectorXd x(width);
    for (int k = 0; k < width; ++k) x[k] = parse_double(toks[static_cast<size_t>(k) + 1], ctx);
    bool is_truth = false;
    if (truth_column) {
      const std::string& f = toks.back();
      if (f != "0" && f != "1") throw std::invalid_argument(ctx + ": truth flag must be 0 or 1");
      is_truth = (f == "1");
    }
    (is_truth ? truth : observed).push_back({t, x});
  }
  if (observed.empty() && truth.empty() && !allow_empty)
    throw std::invalid_argument(path + ": no data rows");
  if (!observed.empty()) out.observed = detail::group_rows(observed, out.declared_d);
  if (!truth.empty()) {
    out.truth = detail::group_rows(truth, out.declared_d);
    out.has_truth = true;
  }
  return out;
}

// ---------------------------------------------------------------------------
// model files: token stream with hexadecimal floats, bit-exact round trip
// ---------------------------------------------------------------------------

struct LiftInfo {
  bool active = false;
  LiftSpec spec;
  int original_D = 0;
};

/// Independent per-time PME fits (the `--mode pme` artifact).
struct PmePerTimeModel {
  VectorXd times;
  std::vector<SplineModel> models;
  VectorXd tau;
  VectorXd lambda_star;
};

struct ModelFile {
  std::string kind;  // "pme" or "lpme"
  LongitudinalModel lpme;
  PmePerTimeModel pme;
  LiftInfo lift;
};

namespace detail {

inline void write_matrix(std::ostream& os, const std::string& name, const MatrixXd& m) {
  os << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) os << (j ? " " : "") << hex_double(m(i, j));
    os << '\n';
  }
}

inline void write_vector(std::ostream& os, const std::string& name, const VectorXd& v) {
  os << name << ' ' << v.size();
  for (int i = 0; i < v.size(); ++i) os << ' ' << hex_double(v[i]);
  os << '\n';
}

class TokenReader {
 public:
  explicit TokenReader(std::istream& is, std::string context)
      : context_(std::move(context)) {
    std::string line;
    while (std::getline(is, line)) {
      if (!line.empty() && line[0] == '#') continue;
      std::istringstream ls(line);
      std::string tok;
      while (ls >> tok) tokens_.push_back(tok);
    }
  }

  std::string next() {
    if (pos_ >= tokens_.size()) throw std::invalid_argument(context_ + ": truncated model file");
    return tokens_[pos_++];
  }

  void expect(const std::string& want) {
    std::string got = next();
    if (got != want)
      throw std::invalid_argument(context_ + ": expected '" + want + "', found '" + got + "'");
  }

  double number() { return parse_double(next(), context_); }

  long integer() {
    std::string tok = next();
    try {
      return std::stol(tok);
    } catch (...) {
      throw std::invalid_argument(context_ + ": malformed integer '" + tok + "'");
    }
  }

  MatrixXd matrix(const std::string& name) {
    expect(name);
    long r = integer(), c = integer();
    if (r < 0 || c < 0) throw std::invalid_argument(context_ + ": negative matrix size");
    MatrixXd m(r, c);
    for (long i = 0; i < r; ++i)
      for (long j = 0; j < c; ++j) m(i, j) = number();
    return m;
  }

  VectorXd vector(const std::string& name) {
    expect(name);
    long n = integer();
    VectorXd v(n);
    for (long i = 0; i < n; ++i) v[i] = number();
    return v;
  }

  bool peek_is(const std::string& tok) const { return pos_ < tokens_.size() && tokens_[pos_] == tok; }

  bool done() const { return pos_ >= tokens_.size(); }

 private:
  std::vector<std::string> tokens_;
  size_t pos_ = 0;
  std::string context_;
};

inline void write_spline_model(std::ostream& os, const SplineModel& m) {
  write_matrix(os, "knots", m.knots);
  write_matrix(os, "s", m.s);
  write_matrix(os, "alpha", m.alpha);
}

inline SplineModel read_spline_model(TokenReader& tr) {
  SplineModel m;
  m.knots = tr.matrix("knots");
  m.s = tr.matrix("s");
  m.alpha = tr.matrix("alpha");
  m.validate();
  return m;
}

}  // namespace detail

inline void write_model(std::ostream& os, const ModelFile& mf, const std::string& header) {
  os << header;
  os << "format_version 1\n";
  os << "kind " << mf.kind << '\n';
  if (mf.lift.active) {
    os << "lift " << (mf.lift.spec.mode == LiftMode::Polar ? "polar" : "spherical") << ' '
       << mf.lift.original_D << ' ' << hex_double(mf.lift.spec.scale);
    for (int i = 0; i < mf.lift.spec.center.size(); ++i)
      os << ' ' << hex_double(mf.lift.spec.center[i]);
    os << '\n';
  }
  if (mf.kind == "lpme") {
    const LongitudinalModel& m = mf.lpme;
    os << "d " << m.d << "\nD " << m.D << '\n';
    detail::write_vector(os, "times", m.times);
    detail::write_matrix(os, "grid", m.grid);
    detail::write_matrix(os, "B", m.B);
    detail::write_vector(os, "tau", m.tau);
    detail::write_vector(os, "w", m.w);
    detail::write_vector(os, "lambda_star", m.lambda_star);
    os << "gamma_star " << hex_double(m.gamma_star) << '\n';
    detail::write_matrix(os, "delta", m.spline.delta);
    detail::write_matrix(os, "nu", m.spline.nu);
    detail::write_matrix(os, "loocv", m.loocv_table);
    detail::write_matrix(os, "param_support", m.param_support);
  } else if (mf.kind == "pme") {
    const PmePerTimeModel& m = mf.pme;
    os << "T " << m.times.size() << '\n';
    detail::write_vector(os, "times", m.times);
    detail::write_vector(os, "tau", m.tau);
    detail::write_vector(os, "lambda_star", m.lambda_star);
    for (const auto& sm : m.models) detail::write_spline_model(os, sm);
  } else {
    throw std::invalid_argument("write_model: unknown kind " + mf.kind);
  }
}

inline void write_model_file(const std::string& path, const ModelFile& mf,
                             const std::string& header) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  write_model(os, mf, header);
}

inline ModelFile read_model(std::istream& is, const std::string& context) {
  detail::TokenReader tr(is, context);
  ModelFile mf;
  tr.expect("format_version");
  long ver = tr.integer();
  if (ver != 1) throw std::invalid_argument(context + ": unsupported format_version");
  tr.expect("kind");
  mf.kind = tr.next();
  if (tr.peek_is("lift")) {
    tr.next();
    std::string mode = tr.next();
    mf.lift.active = true;
    mf.lift.spec.mode = mode == "polar" ? LiftMode::Polar : LiftMode::Spherical;
    if (mode != "polar" && mode != "spherical")
      throw std::invalid_argument(context + ": unknown lift mode " + mode);
    mf.lift.original_D = static_cast<int>(tr.integer());
    mf.lift.spec.scale = tr.number();
    mf.lift.spec.center.resize(mf.lift.original_D);
    for (int i = 0; i < mf.lift.original_D; ++i) mf.lift.spec.center[i] = tr.number();
  }
  if (mf.kind == "lpme") {
    LongitudinalModel& m = mf.lpme;
    tr.expect("d");
    m.d = static_cast<int>(tr.integer());
    tr.expect("D");
    m.D = static_cast<int>(tr.integer());
    m.times = tr.vector("times");
    m.grid = tr.matrix("grid");
    m.B = tr.matrix("B");
    m.tau = tr.vector("tau");
    m.w = tr.vector("w");
    m.lambda_star = tr.vector("lambda_star");
    tr.expect("gamma_star");
    m.gamma_star = tr.number();
    m.spline.times = m.times;
    m.spline.gamma = m.gamma_star;
    m.spline.weights = m.w;
    m.spline.delta = tr.matrix("delta");
    m.spline.nu = tr.matrix("nu");
    m.loocv_table = tr.matrix("loocv");
    m.param_support = tr.matrix("param_support");
  } else if (mf.kind == "pme") {
    PmePerTimeModel& m = mf.pme;
    tr.expect("T");
    long T = tr.integer();
    m.times = tr.vector("times");
    m.tau = tr.vector("tau");
    m.lambda_star = tr.vector("lambda_star");
    for (long t = 0; t < T; ++t) m.models.push_back(detail::read_spline_model(tr));
  } else {
    throw std::invalid_argument(context + ": unknown model kind " + mf.kind);
  }
  return mf;
}

inline ModelFile read_model_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::invalid_argument("cannot open model file: " + path);
  return read_model(is, path);
}

// ---------------------------------------------------------------------------
// evaluation shared by `fit` reports and `evaluate`
// ---------------------------------------------------------------------------

/// Per-time MSD of a serialized model against a cloud. A lifted model scored
/// against an unlifted cloud is truncated to the original coordinates.
inline VectorXd per_time_msd(const ModelFile& mf, const LongitudinalCloud& cloud) {
  VectorXd out(cloud.T());
  for (int t = 0; t < cloud.T(); ++t) {
    SplineModel m;
    if (mf.kind == "lpme") {
      m = model_at_time(mf.lpme, cloud.times[t]);
    } else {
      int idx = -1;
      for (int i = 0; i < mf.pme.times.size(); ++i)
        if (std::abs(mf.pme.times[i] - cloud.times[t]) < 1e-9) idx = i;
      if (idx < 0)
        throw std::invalid_argument("model has no fit at time " + std::to_string(cloud.times[t]));
      m = mf.pme.models[static_cast<size_t>(idx)];
    }
    const MatrixXd& pts = cloud.clouds[static_cast<size_t>(t)];
    if (m.D() == pts.cols()) {
      out[t] = msd(m, pts);
    } else if (mf.lift.active && pts.cols() == mf.lift.original_D) {
      out[t] = msd_to_truth(m, pts);  // truncates the model outputs
    } else {
      throw std::invalid_argument("dimension mismatch between model and cloud");
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// factorial result tables
// ---------------------------------------------------------------------------

namespace detail {

inline std::string sanitize_message(std::string s) {
  if (s.empty()) return "-";
  for (char& c : s)
    if (c == ' ' || c == '\t' || c == '\n') c = '_';
  return s;
}

}  // namespace detail

inline void write_factorial_table(std::ostream& os, const FactorialResult& res,
                                  const std::string& header) {
  os << header;
  os << "case combo master_seed run_seed sd_alpha sd_beta sd_zeta duration interval change "
        "msd_data msd_lpme msd_pme err_lpme err_pme\n";
  for (const auto& r : res.rows) {
    os << r.case_id << ' ' << r.combo << ' ' << r.master_seed << ' ' << r.run_seed << ' '
       << dec_double(r.sd_alpha) << ' ' << dec_double(r.sd_beta) << ' ' << dec_double(r.sd_zeta)
       << ' ' << dec_double(r.duration) << ' ' << dec_double(r.interval) << ' '
       << change_model_name(r.change) << ' ' << dec_double(r.msd_data) << ' '
       << dec_double(r.msd_lpme) << ' ' << dec_double(r.msd_pme) << ' '
       << detail::sanitize_message(r.error_lpme) << ' ' << detail::sanitize_message(r.error_pme)
       << '\n';
  }
}

inline void write_factorial_summary(std::ostream& os, const FactorialResult& res,
                                    const std::string& header) {
  os << header;
  os << "case estimator median iqr mean sd n missing\n";
  for (const auto& s : res.summaries) {
    auto line = [&](const char* name, const EstimatorStats& e) {
      os << s.case_id << ' ' << name << ' ' << dec_double(e.median) << ' ' << dec_double(e.iqr)
         << ' ' << dec_double(e.mean) << ' ' << dec_double(e.sd) << ' ' << e.n << ' ' << e.missing
         << '\n';
    };
    line("data", s.data);
    line("lpme", s.lpme);
    line("pme", s.pme);
  }
}

}  // namespace lpme
