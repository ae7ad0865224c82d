#include "suruq/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

namespace suruq {

using nlohmann::json;

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

[[noreturn]] void parse_fail(const std::string& path, size_t line, const std::string& what) {
  std::ostringstream msg;
  msg << path << ":" << line << ": " << what;
  throw ParseError(msg.str());
}

double parse_cell(const std::string& path, size_t line, size_t col,
                  const std::string& cell, bool require_finite = true) {
  double v = 0.0;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  const auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc() || res.ptr != end) {
    std::ostringstream what;
    what << "column " << col + 1 << ": cannot parse '" << cell << "' as a number";
    parse_fail(path, line, what.str());
  }
  if (require_finite && !std::isfinite(v)) {
    std::ostringstream what;
    what << "column " << col + 1 << ": non-finite value '" << cell << "'";
    parse_fail(path, line, what.str());
  }
  return v;
}

struct RawCsv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;  // cell text
  std::vector<size_t> line_numbers;
};

RawCsv read_raw_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open file");
  RawCsv raw;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (raw.header.empty()) {
      raw.header = split_line(t);
      continue;
    }
    auto cells = split_line(t);
    if (cells.size() != raw.header.size()) {
      std::ostringstream what;
      what << "expected " << raw.header.size() << " columns, found " << cells.size();
      parse_fail(path, line_no, what.str());
    }
    raw.rows.push_back(std::move(cells));
    raw.line_numbers.push_back(line_no);
  }
  if (raw.header.empty()) throw ParseError(path + ": empty file");
  return raw;
}

std::string quote_csv(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j, const std::string& what) {
  if (!j.is_array() || j.empty())
    throw ParseError(what + ": expected a non-empty array of rows");
  const size_t cols = j[0].size();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()),
                    static_cast<Eigen::Index>(cols));
  for (size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_array() || j[i].size() != cols)
      throw ParseError(what + ": ragged rows");
    for (size_t k = 0; k < cols; ++k)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
          j[i][k].get<double>();
  }
  return m;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v,
                                 std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

NumericCsv read_numeric_csv(const std::string& path) {
  const RawCsv raw = read_raw_csv(path);
  NumericCsv out;
  out.columns = raw.header;
  out.values.resize(static_cast<Eigen::Index>(raw.rows.size()),
                    static_cast<Eigen::Index>(raw.header.size()));
  for (size_t i = 0; i < raw.rows.size(); ++i)
    for (size_t c = 0; c < raw.rows[i].size(); ++c)
      out.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
          parse_cell(path, raw.line_numbers[i], c, raw.rows[i][c]);
  return out;
}

OutputData read_outputs_csv(const std::string& path) {
  const RawCsv raw = read_raw_csv(path);
  const bool long_format = raw.header.size() == 4 && raw.header[0] == "sample" &&
                           raw.header[1] == "site" && raw.header[2] == "time" &&
                           raw.header[3] == "value";
  OutputData out;
  if (!long_format) {
    NumericCsv table = read_numeric_csv(path);
    out.values = std::move(table.values);
    out.labels = std::move(table.columns);
    out.n_sites = static_cast<int>(out.labels.size());
    out.n_times = 1;
    if (out.values.rows() < 1) throw ParseError(path + ": no data rows");
    return out;
  }

  // Long format: normalize (sample, site, time, value) onto compound columns.
  std::vector<std::string> sample_keys, site_keys;
  std::vector<double> time_values;
  std::map<std::string, int> sample_index, site_index;
  std::map<double, int> time_order;
  struct Entry {
    int sample;
    int site;
    double time;
    double value;
    size_t line;
  };
  std::vector<Entry> entries;
  entries.reserve(raw.rows.size());
  for (size_t i = 0; i < raw.rows.size(); ++i) {
    const auto& cells = raw.rows[i];
    const size_t line = raw.line_numbers[i];
    Entry e;
    if (auto it = sample_index.find(cells[0]); it != sample_index.end()) {
      e.sample = it->second;
    } else {
      e.sample = static_cast<int>(sample_keys.size());
      sample_index.emplace(cells[0], e.sample);
      sample_keys.push_back(cells[0]);
    }
    if (auto it = site_index.find(cells[1]); it != site_index.end()) {
      e.site = it->second;
    } else {
      e.site = static_cast<int>(site_keys.size());
      site_index.emplace(cells[1], e.site);
      site_keys.push_back(cells[1]);
    }
    e.time = parse_cell(path, line, 2, cells[2]);
    e.value = parse_cell(path, line, 3, cells[3]);
    e.line = line;
    time_order.emplace(e.time, 0);
    entries.push_back(e);
  }
  {
    int t = 0;
    for (auto& [key, idx] : time_order) idx = t++;
  }
  const int n_s = static_cast<int>(sample_keys.size());
  const int n_sites = static_cast<int>(site_keys.size());
  const int n_times = static_cast<int>(time_order.size());
  out.n_sites = n_sites;
  out.n_times = n_times;
  out.values.setConstant(n_s, static_cast<Eigen::Index>(n_sites) * n_times,
                         std::numeric_limits<double>::quiet_NaN());
  for (const Entry& e : entries) {
    const int col = flatten_spacetime(n_sites, n_times, e.site, time_order[e.time]);
    if (!std::isnan(out.values(e.sample, col))) {
      std::ostringstream what;
      what << "duplicate (sample, site, time) triple";
      parse_fail(path, e.line, what.str());
    }
    out.values(e.sample, col) = e.value;
  }
  for (Eigen::Index i = 0; i < out.values.rows(); ++i)
    for (Eigen::Index c = 0; c < out.values.cols(); ++c)
      if (std::isnan(out.values(i, c))) {
        const auto [site, time] = unflatten_spacetime(n_sites, n_times,
                                                      static_cast<int>(c));
        std::ostringstream what;
        what << path << ": incomplete site-time grid: sample '" << sample_keys[i]
             << "' has no value for site '" << site_keys[static_cast<size_t>(site)]
             << "' at time index " << time;
        throw ParseError(what.str());
      }
  out.labels.reserve(static_cast<size_t>(n_sites) * n_times);
  std::vector<double> times_sorted(time_order.size());
  for (const auto& [key, idx] : time_order) times_sorted[static_cast<size_t>(idx)] = key;
  for (int s = 0; s < n_sites; ++s)
    for (int t = 0; t < n_times; ++t)
      out.labels.push_back(site_keys[static_cast<size_t>(s)] + "@" +
                           format_double(times_sorted[static_cast<size_t>(t)]));
  return out;
}

Eigen::MatrixXd read_inputs_csv(const std::string& path,
                                std::vector<std::string>* names) {
  NumericCsv table = read_numeric_csv(path);
  if (table.values.rows() < 1) throw ParseError(path + ": no data rows");
  if (names != nullptr) *names = table.columns;
  return std::move(table.values);
}

InputPosterior read_input_posterior_csv(const std::string& path) {
  NumericCsv table = read_numeric_csv(path);
  if (table.values.rows() < 1) throw ParseError(path + ": no data rows");
  int weight_col = -1;
  for (size_t c = 0; c < table.columns.size(); ++c)
    if (table.columns[c] == "__weight") weight_col = static_cast<int>(c);

  if (weight_col < 0) return InputPosterior::uniform(std::move(table.values));

  const Eigen::Index n = table.values.rows();
  Eigen::VectorXd weights = table.values.col(weight_col);
  Eigen::MatrixXd samples(n, table.values.cols() - 1);
  Eigen::Index k = 0;
  for (Eigen::Index c = 0; c < table.values.cols(); ++c)
    if (c != weight_col) samples.col(k++) = table.values.col(c);
  return InputPosterior::from_samples(std::move(samples), std::move(weights));
}

void write_propagation_csv(const std::string& path,
                           const std::vector<std::string>& site_labels,
                           const PropagationResult& result) {
  std::ofstream out(path);
  if (!out) throw ParseError(path + ": cannot open file for writing");
  out << "site,mean,var_naive,var_total,surrogate_term,surrogate_share,trust_ratio,"
         "trustworthy";
  if (!result.surrogate_defined) out << ",surrogate_defined";
  out << "\n";
  const int n_x = static_cast<int>(result.mean.size());
  for (int x = 0; x < n_x; ++x) {
    out << quote_csv(site_labels[static_cast<size_t>(x)]) << ","
        << format_double(result.mean[x]) << "," << format_double(result.cov_naive(x, x))
        << "," << format_double(result.cov_total(x, x)) << ","
        << format_double(result.surrogate_term) << ","
        << format_double(result.surrogate_share[x]) << ","
        << format_double(result.trust_ratio[x]) << ","
        << (result.trustworthy[static_cast<size_t>(x)] ? 1 : 0);
    if (!result.surrogate_defined) out << ",0";
    out << "\n";
  }
}

json basis_spec_to_json(const BasisSpec& spec) {
  json j;
  j["family"] = "legendre";
  json indices = json::array();
  for (const MultiIndex& idx : spec.indices) indices.push_back(idx);
  j["indices"] = std::move(indices);
  json domain = json::array();
  for (const Interval& iv : spec.domain) domain.push_back(json::array({iv.lo, iv.hi}));
  j["domain"] = std::move(domain);
  return j;
}

BasisSpec basis_spec_from_json(const json& j) {
  BasisSpec spec;
  if (j.value("family", "") != "legendre")
    throw ParseError("basis spec: unknown family '" + j.value("family", "") + "'");
  if (!j.contains("indices") || !j.contains("domain"))
    throw ParseError("basis spec: missing 'indices' or 'domain'");
  for (const auto& idx : j["indices"]) spec.indices.push_back(idx.get<MultiIndex>());
  for (const auto& iv : j["domain"]) {
    if (!iv.is_array() || iv.size() != 2)
      throw ParseError("basis spec: each domain entry must be [lo, hi]");
    spec.domain.push_back({iv[0].get<double>(), iv[1].get<double>()});
  }
  spec.validate();
  return spec;
}

void write_posterior_artifact(const std::string& path,
                              const CoefficientPosterior& post) {
  json j;
  j["format_version"] = 1;
  j["spec"] = basis_spec_to_json(post.spec);
  j["c_hat"] = matrix_to_json(post.c_hat);
  j["h_matrix"] = matrix_to_json(post.h_factor.matrix());
  j["chi2_min"] = post.chi2_min;
  if (post.sigma2_hat)
    j["sigma2_hat"] = *post.sigma2_hat;
  else
    j["sigma2_hat"] = nullptr;
  j["dims"] = {{"n_s", post.dims.n_s}, {"n_p", post.dims.n_p}, {"n_x", post.dims.n_x}};
  j["site_labels"] = post.site_labels;
  std::ofstream out(path);
  if (!out) throw ParseError(path + ": cannot open file for writing");
  out << j.dump(2) << "\n";
}

CoefficientPosterior read_posterior_artifact(const std::string& path) {
  const json j = load_json_file(path);
  if (j.value("format_version", 0) != 1)
    throw ParseError(path + ": unsupported artifact format_version");

  CoefficientPosterior post;
  post.spec = basis_spec_from_json(j.at("spec"));
  post.c_hat = matrix_from_json(j.at("c_hat"), path + ": c_hat");
  Eigen::MatrixXd h = matrix_from_json(j.at("h_matrix"), path + ": h_matrix");
  if ((h - h.transpose()).cwiseAbs().maxCoeff() >
      1e-12 * std::max(1.0, h.cwiseAbs().maxCoeff()))
    throw ParseError(path + ": h_matrix is not symmetric");
  post.h_factor = SpdFactor::factor(std::move(h), path + ": h_matrix");
  post.chi2_min = j.at("chi2_min").get<double>();
  if (post.chi2_min < 0.0) throw ParseError(path + ": negative chi2_min");
  const auto& dims = j.at("dims");
  post.dims = {dims.at("n_s").get<int>(), dims.at("n_p").get<int>(),
               dims.at("n_x").get<int>()};
  post.site_labels = j.at("site_labels").get<std::vector<std::string>>();

  if (post.c_hat.rows() != post.dims.n_p || post.c_hat.cols() != post.dims.n_x ||
      post.h_factor.size() != post.dims.n_p ||
      post.spec.n_basis() != post.dims.n_p ||
      static_cast<int>(post.site_labels.size()) != post.dims.n_x)
    throw ParseError(path + ": artifact dimensions are inconsistent");

  // sigma2_hat is recomputed from chi2_min so that a reloaded posterior is
  // bit-identical to the fitted one; the stored value is only validated.
  if (post.dims.sigma2_denominator() > 0) {
    post.sigma2_hat =
        post.chi2_min / static_cast<double>(post.dims.sigma2_denominator());
    if (!j.at("sigma2_hat").is_number() ||
        std::abs(j.at("sigma2_hat").get<double>() - *post.sigma2_hat) >
            1e-12 * std::max(1.0, *post.sigma2_hat))
      throw ParseError(path + ": sigma2_hat is inconsistent with chi2_min and dims");
  } else if (!j.at("sigma2_hat").is_null()) {
    throw ParseError(path + ": sigma2_hat must be null when the dof condition fails");
  }
  return post;
}

json kernel_to_json(const Kernel& kernel) {
  json j;
  j["family"] = "squared_exponential";
  j["amplitude2"] = kernel.amplitude2;
  json ls = json::array();
  for (Eigen::Index d = 0; d < kernel.lengthscales.size(); ++d)
    ls.push_back(kernel.lengthscales[d]);
  j["lengthscales"] = std::move(ls);
  j["nugget"] = kernel.effective_nugget();
  return j;
}

Kernel kernel_from_json(const json& j) {
  if (j.value("family", "") != "squared_exponential")
    throw ParseError("kernel: unknown family '" + j.value("family", "") + "'");
  Kernel k;
  k.amplitude2 = j.at("amplitude2").get<double>();
  const auto& ls = j.at("lengthscales");
  k.lengthscales.resize(static_cast<Eigen::Index>(ls.size()));
  for (size_t d = 0; d < ls.size(); ++d)
    k.lengthscales[static_cast<Eigen::Index>(d)] = ls[d].get<double>();
  if (j.contains("nugget")) k.nugget = j.at("nugget").get<double>();
  k.validate(static_cast<int>(k.lengthscales.size()));
  return k;
}

ThetaGrid theta_grid_from_json(const json& j) {
  if (!j.contains("points") || !j["points"].is_array())
    throw ParseError("theta grid: missing 'points' array");
  std::vector<ThetaGrid::Point> points;
  for (const auto& p : j["points"])
    points.push_back({kernel_from_json(p.at("kernel")), p.at("weight").get<double>()});
  return ThetaGrid::make(std::move(points));
}

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open file");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return j;
}

}  // namespace suruq
