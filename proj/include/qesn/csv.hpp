// CSV serialization for datasets, feature matrices, predictions and readout
// models. Files carry `# key=value` comment lines (config hash and run
// metadata) ahead of the header row; numbers are written with 12 significant
// digits.
#pragma once

#include <qesn/core.hpp>
#include <qesn/elastic_net.hpp>
#include <qesn/lorenz.hpp>
#include <qesn/reservoir.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace qesn {

inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path);
  require(out.good(), ErrorCategory::io, "cannot open " + path.string() + " for writing");
  return out;
}

inline std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCategory::io, "cannot open " + path.string());
  return in;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) fields.push_back(field);
  return fields;
}

inline void write_comments(std::ofstream& out,
                           const std::map<std::string, std::string>& comments) {
  for (const auto& [key, value] : comments) out << "# " << key << "=" << value << "\n";
}

// Reads `# key=value` lines; leaves the stream at the header row.
inline std::map<std::string, std::string> read_comments(std::ifstream& in) {
  std::map<std::string, std::string> comments;
  while (in.peek() == '#') {
    std::string line;
    std::getline(in, line);
    const auto eq = line.find('=');
    if (eq != std::string::npos) {
      std::string key = line.substr(2, eq - 2);
      comments[key] = line.substr(eq + 1);
    }
  }
  return comments;
}

}  // namespace detail

// --- dataset ----------------------------------------------------------------

template <class Scalar>
void write_dataset_csv(const std::filesystem::path& path,
                       const LorenzDataset<Scalar>& ds,
                       const std::map<std::string, std::string>& comments) {
  auto out = detail::open_out(path);
  detail::write_comments(out, comments);
  out << "t,x,y,z\n";
  for (Index t = 0; t < ds.samples.rows(); ++t) {
    out << t;
    for (int c = 0; c < 3; ++c) {
      out << ',' << format_number(static_cast<double>(ds.samples(t, c)));
    }
    out << '\n';
  }
}

// Returns the normalized N x 3 sample block.
inline MatrixX<double> read_dataset_csv(const std::filesystem::path& path) {
  auto in = detail::open_in(path);
  detail::read_comments(in);
  std::string line;
  std::getline(in, line);
  require(line == "t,x,y,z", ErrorCategory::io,
          "unexpected dataset header in " + path.string());
  std::vector<std::array<double, 3>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = detail::split_csv_line(line);
    require(fields.size() == 4, ErrorCategory::io,
            "malformed dataset row in " + path.string());
    rows.push_back({std::stod(fields[1]), std::stod(fields[2]), std::stod(fields[3])});
  }
  MatrixX<double> out(static_cast<Index>(rows.size()), 3);
  for (Index i = 0; i < out.rows(); ++i) {
    for (int c = 0; c < 3; ++c) out(i, c) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)];
  }
  return out;
}

// --- features ---------------------------------------------------------------

template <class Scalar>
void write_feature_csv(const std::filesystem::path& path, const FeatureMatrix<Scalar>& fm,
                       std::map<std::string, std::string> comments) {
  comments["mode"] = fm.mode == FeatureMode::distribution ? "distribution" : "expectation";
  comments["n_readout"] = std::to_string(fm.n_readout);
  auto out = detail::open_out(path);
  detail::write_comments(out, comments);
  out << 't';
  for (Index c = 0; c < fm.values.cols(); ++c) out << ",f" << c;
  out << '\n';
  for (Index r = 0; r < fm.values.rows(); ++r) {
    out << fm.timesteps[r];
    for (Index c = 0; c < fm.values.cols(); ++c) {
      out << ',' << format_number(static_cast<double>(fm.values(r, c)));
    }
    out << '\n';
  }
}

inline FeatureMatrix<double> read_feature_csv(const std::filesystem::path& path) {
  auto in = detail::open_in(path);
  const auto comments = detail::read_comments(in);
  FeatureMatrix<double> fm;
  if (auto it = comments.find("mode"); it != comments.end()) {
    fm.mode = it->second == "expectation" ? FeatureMode::expectation
                                          : FeatureMode::distribution;
  }
  if (auto it = comments.find("n_readout"); it != comments.end()) {
    fm.n_readout = std::stoi(it->second);
  }
  std::string line;
  std::getline(in, line);
  const Index width = static_cast<Index>(detail::split_csv_line(line).size()) - 1;
  require(width >= 1, ErrorCategory::io, "feature header too narrow in " + path.string());
  std::vector<std::vector<double>> rows;
  std::vector<int> ts;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = detail::split_csv_line(line);
    require(static_cast<Index>(fields.size()) == width + 1, ErrorCategory::io,
            "inconsistent feature width in " + path.string());
    ts.push_back(std::stoi(fields[0]));
    std::vector<double> row;
    row.reserve(static_cast<std::size_t>(width));
    for (Index c = 1; c <= width; ++c) row.push_back(std::stod(fields[static_cast<std::size_t>(c)]));
    rows.push_back(std::move(row));
  }
  fm.timesteps.resize(static_cast<Index>(ts.size()));
  fm.values.resize(static_cast<Index>(rows.size()), width);
  for (Index r = 0; r < fm.values.rows(); ++r) {
    fm.timesteps[r] = ts[static_cast<std::size_t>(r)];
    for (Index c = 0; c < width; ++c) fm.values(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
  }
  return fm;
}

// --- predictions -------------------------------------------------------------

template <class Scalar>
void write_predictions_csv(const std::filesystem::path& path,
                           const Eigen::VectorXi& timesteps,
                           const MatrixX<Scalar>& y_true, const MatrixX<Scalar>& y_pred,
                           const std::vector<std::string>& target_names,
                           const std::map<std::string, std::string>& comments) {
  require(y_true.rows() == y_pred.rows() && y_true.cols() == y_pred.cols(),
          ErrorCategory::shape, "prediction blocks must be aligned");
  require(static_cast<Index>(target_names.size()) == y_true.cols(), ErrorCategory::shape,
          "one name per target column required");
  auto out = detail::open_out(path);
  detail::write_comments(out, comments);
  out << 't';
  for (const auto& name : target_names) out << ',' << name << "_true," << name << "_pred";
  out << '\n';
  for (Index r = 0; r < y_true.rows(); ++r) {
    out << timesteps[r];
    for (Index c = 0; c < y_true.cols(); ++c) {
      out << ',' << format_number(static_cast<double>(y_true(r, c))) << ','
          << format_number(static_cast<double>(y_pred(r, c)));
    }
    out << '\n';
  }
}

// --- readout models ----------------------------------------------------------

template <class Scalar>
void write_model_csv(const std::filesystem::path& path, const ReadoutModel<Scalar>& model,
                     std::map<std::string, std::string> comments) {
  comments["n_features"] = std::to_string(model.coefficients.rows());
  comments["n_targets"] = std::to_string(model.coefficients.cols());
  auto out = detail::open_out(path);
  detail::write_comments(out, comments);
  for (Index t = 0; t < model.intercept.size(); ++t) {
    out << "# intercept," << t << ',' << format_number(static_cast<double>(model.intercept[t])) << '\n';
  }
  for (Index j = 0; j < model.feature_mean.size(); ++j) {
    out << "# standardize," << j << ',' << format_number(static_cast<double>(model.feature_mean[j]))
        << ',' << format_number(static_cast<double>(model.feature_scale[j])) << '\n';
  }
  out << "feature,target,coefficient\n";
  for (Index j = 0; j < model.coefficients.rows(); ++j) {
    for (Index t = 0; t < model.coefficients.cols(); ++t) {
      out << j << ',' << t << ',' << format_number(static_cast<double>(model.coefficients(j, t))) << '\n';
    }
  }
}

inline ReadoutModel<double> read_model_csv(const std::filesystem::path& path) {
  auto in = detail::open_in(path);
  ReadoutModel<double> model;
  Index n_features = -1, n_targets = -1;
  std::vector<std::pair<Index, double>> intercepts;
  std::vector<std::tuple<Index, double, double>> standardize;
  std::string line;
  while (in.peek() == '#') {
    std::getline(in, line);
    const auto body = line.substr(2);
    const auto fields = detail::split_csv_line(body);
    if (fields[0] == "intercept" && fields.size() == 3) {
      intercepts.emplace_back(std::stol(fields[1]), std::stod(fields[2]));
    } else if (fields[0] == "standardize" && fields.size() == 4) {
      standardize.emplace_back(std::stol(fields[1]), std::stod(fields[2]),
                               std::stod(fields[3]));
    } else if (body.rfind("n_features=", 0) == 0) {
      n_features = std::stol(body.substr(11));
    } else if (body.rfind("n_targets=", 0) == 0) {
      n_targets = std::stol(body.substr(10));
    }
  }
  require(n_features > 0 && n_targets > 0, ErrorCategory::io,
          "model file missing shape metadata: " + path.string());
  model.coefficients = MatrixX<double>::Zero(n_features, n_targets);
  model.intercept = VectorX<double>::Zero(n_targets);
  model.feature_mean = VectorX<double>::Zero(n_features);
  model.feature_scale = VectorX<double>::Ones(n_features);
  for (const auto& [t, v] : intercepts) model.intercept[t] = v;
  for (const auto& [j, mu, sc] : standardize) {
    model.feature_mean[j] = mu;
    model.feature_scale[j] = sc;
  }
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = detail::split_csv_line(line);
    require(fields.size() == 3, ErrorCategory::io, "malformed model row");
    model.coefficients(std::stol(fields[0]), std::stol(fields[1])) = std::stod(fields[2]);
  }
  return model;
}

}  // namespace qesn
