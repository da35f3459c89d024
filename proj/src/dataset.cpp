#include "glmm/dataset.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "glmm/errors.hpp"

namespace glmm {

Dataset::Dataset(MatrixXd X, MatrixXd Z, VectorXd y, std::vector<Index> offsets, std::optional<std::vector<int>> w)
    : X_(std::move(X)), Z_(std::move(Z)), y_(std::move(y)), offsets_(std::move(offsets)), w_(std::move(w)) {
  if (offsets_.empty()) offsets_.push_back(0);
  const Index n = n_subjects();
  subject_ids.resize(static_cast<size_t>(n));
  for (Index i = 0; i < n; ++i) subject_ids[static_cast<size_t>(i)] = i + 1;
  times.resize(static_cast<size_t>(y_.size()));
  for (Index i = 0; i < n; ++i)
    for (Index r = offsets_[i]; r < offsets_[i + 1]; ++r) times[static_cast<size_t>(r)] = static_cast<double>(r - offsets_[i] + 1);
  validate();
}

SubjectView Dataset::subject(Index i) const {
  const Index off = offsets_[i];
  const Index len = offsets_[i + 1] - off;
  std::optional<int> wi;
  if (w_) wi = (*w_)[static_cast<size_t>(i)];
  return SubjectView{X_.middleRows(off, len), Z_.middleRows(off, len), y_.segment(off, len), wi};
}

void Dataset::compute_indicator() {
  std::vector<int> w(static_cast<size_t>(n_subjects()));
  for (Index i = 0; i < n_subjects(); ++i) {
    w[static_cast<size_t>(i)] = subject(i).y.sum() == 0.0 ? 1 : 0;
  }
  w_ = std::move(w);
}

void Dataset::validate() const {
  if (X_.rows() != y_.size() || Z_.rows() != y_.size())
    throw ConfigError("dataset: X, Z and y must have the same number of rows");
  if (offsets_.front() != 0 || offsets_.back() != y_.size())
    throw ConfigError("dataset: subject offsets do not cover the rows");
  for (Index i = 0; i < n_subjects(); ++i) {
    if (offsets_[i + 1] - offsets_[i] < 1)
      throw ConfigError("dataset: subject " + std::to_string(i) + " has no observations");
  }
  if (!y_.allFinite() || !X_.allFinite() || !Z_.allFinite()) throw ConfigError("dataset: non-finite values");
  if (w_) {
    if (static_cast<Index>(w_->size()) != n_subjects()) throw ConfigError("dataset: indicator length mismatch");
    for (Index i = 0; i < n_subjects(); ++i) {
      const int expected = subject(i).y.sum() == 0.0 ? 1 : 0;
      if ((*w_)[static_cast<size_t>(i)] != expected)
        throw ConfigError("dataset: w must equal 1(sum_t Y_it = 0) for subject " + std::to_string(i));
    }
  }
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    size_t b = 0;
    while (b < cell.size() && cell[b] == ' ') ++b;
    out.push_back(cell.substr(b));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double to_double(const std::string& s, size_t line_no) {
  try {
    size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("dataset: cannot parse '" + s + "' on line " + std::to_string(line_no));
  }
}

}  // namespace

Dataset read_dataset_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("dataset: empty file");
  const auto header = split_csv(line);
  if (header.size() < 3 || header[0] != "subject_id" || header[1] != "t" || header[2] != "y")
    throw ConfigError("dataset: header must start with subject_id,t,y");
  size_t p = 0, q = 0;
  bool has_w = false;
  for (size_t c = 3; c < header.size(); ++c) {
    const auto& h = header[c];
    if (h == "x_" + std::to_string(p + 1) && q == 0 && !has_w) {
      ++p;
    } else if (h == "z_" + std::to_string(q + 1) && !has_w) {
      ++q;
    } else if (h == "w" && c + 1 == header.size()) {
      has_w = true;
    } else {
      throw ConfigError("dataset: unexpected header column '" + h + "'");
    }
  }
  if (p == 0) throw ConfigError("dataset: at least one x column is required");
  const size_t ncol = header.size();

  std::vector<std::int64_t> ids;
  std::vector<double> ts, ys, xs, zs;
  std::vector<int> wrow;
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv(line);
    if (cells.size() != ncol) throw ConfigError("dataset: wrong column count on line " + std::to_string(line_no));
    ids.push_back(static_cast<std::int64_t>(to_double(cells[0], line_no)));
    ts.push_back(to_double(cells[1], line_no));
    ys.push_back(to_double(cells[2], line_no));
    for (size_t c = 0; c < p; ++c) xs.push_back(to_double(cells[3 + c], line_no));
    for (size_t c = 0; c < q; ++c) zs.push_back(to_double(cells[3 + p + c], line_no));
    if (has_w) wrow.push_back(static_cast<int>(to_double(cells.back(), line_no)));
  }

  const Index N = static_cast<Index>(ys.size());
  MatrixXd X(N, static_cast<Index>(p)), Z(N, static_cast<Index>(q));
  VectorXd y(N);
  std::vector<Index> offsets{0};
  std::vector<std::int64_t> subject_ids;
  std::vector<int> w;
  std::vector<std::int64_t> seen;
  for (Index r = 0; r < N; ++r) {
    const auto ur = static_cast<size_t>(r);
    y(r) = ys[ur];
    for (size_t c = 0; c < p; ++c) X(r, static_cast<Index>(c)) = xs[ur * p + c];
    for (size_t c = 0; c < q; ++c) Z(r, static_cast<Index>(c)) = zs[ur * q + c];
    const bool new_subject = r == 0 || ids[ur] != ids[ur - 1];
    if (new_subject) {
      for (auto s : subject_ids)
        if (s == ids[ur]) throw ConfigError("dataset: rows of subject " + std::to_string(ids[ur]) + " are not contiguous");
      if (r > 0) offsets.push_back(r);
      subject_ids.push_back(ids[ur]);
      if (has_w) w.push_back(wrow[ur]);
    } else {
      if (ts[ur] < ts[ur - 1]) throw ConfigError("dataset: t must ascend within subject " + std::to_string(ids[ur]));
      if (has_w && wrow[ur] != w.back()) throw ConfigError("dataset: w must be constant within a subject");
    }
  }
  if (N > 0) offsets.push_back(N);

  std::optional<std::vector<int>> wopt;
  if (has_w) wopt = std::move(w);
  Dataset data(std::move(X), std::move(Z), std::move(y), std::move(offsets), std::move(wopt));
  data.subject_ids = std::move(subject_ids);
  data.times = std::move(ts);
  return data;
}

Dataset read_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dataset '" + path + "'");
  return read_dataset_csv(in);
}

void write_dataset_csv(const Dataset& data, std::ostream& out) {
  out << "subject_id,t,y";
  for (Index c = 0; c < data.p(); ++c) out << ",x_" << c + 1;
  for (Index c = 0; c < data.q(); ++c) out << ",z_" << c + 1;
  if (data.has_indicator()) out << ",w";
  out << '\n';
  out << std::setprecision(17);
  for (Index i = 0; i < data.n_subjects(); ++i) {
    for (Index r = data.offsets()[i]; r < data.offsets()[i + 1]; ++r) {
      out << data.subject_ids[static_cast<size_t>(i)] << ',' << data.times[static_cast<size_t>(r)] << ',' << data.y()(r);
      for (Index c = 0; c < data.p(); ++c) out << ',' << data.X()(r, c);
      for (Index c = 0; c < data.q(); ++c) out << ',' << data.Z()(r, c);
      if (data.has_indicator()) out << ',' << (*data.indicator())[static_cast<size_t>(i)];
      out << '\n';
    }
  }
}

void write_dataset_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write dataset '" + path + "'");
  write_dataset_csv(data, out);
}

}  // namespace glmm
