// CSV ingestion of long-format panels and writers for the machine-readable
// result artifacts (JSON and CSV reports).
#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lssc/estimator.hpp"
#include "lssc/panel.hpp"
#include "lssc/selection.hpp"
#include "lssc/simulation.hpp"

namespace lssc {

namespace detail {

// Shortest exact decimal representation (round-trips through strtod).
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  double back = std::strtod(buf, nullptr);
  if (back == v) {
    for (int prec = 1; prec <= 16; ++prec) {
      char shorter[32];
      std::snprintf(shorter, sizeof(shorter), "%.*g", prec, v);
      if (std::strtod(shorter, nullptr) == v) return shorter;
    }
  }
  return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

}  // namespace detail

// Reads a long-format panel CSV with header `unit,time,y,x1,...,xp`.
inline PanelData read_panel_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open input file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw InvalidInput("empty input file: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = detail::split_csv_line(line);
  if (header.size() < 3 || header[0] != "unit" || header[1] != "time" ||
      header[2] != "y")
    throw InvalidInput("header must start with unit,time,y");
  const std::size_t p = header.size() - 3;
  for (std::size_t q = 0; q < p; ++q)
    if (header[3 + q] != "x" + std::to_string(q + 1))
      throw InvalidInput("covariate columns must be named x1..xp in order");

  std::vector<PanelRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != header.size())
      throw InvalidInput("line " + std::to_string(line_no) +
                         ": wrong field count");
    PanelRow row;
    row.unit = fields[0];
    row.time = fields[1];
    try {
      row.y = std::stod(fields[2]);
      for (std::size_t q = 0; q < p; ++q)
        row.x.push_back(std::stod(fields[3 + q]));
    } catch (...) {
      throw InvalidInput("line " + std::to_string(line_no) +
                         ": unparseable number");
    }
    rows.push_back(std::move(row));
  }
  return load_panel(rows);
}

inline void write_panel_csv(const PanelData& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write file: " + path);
  out << "unit,time,y";
  for (int q = 0; q < data.p(); ++q) out << ",x" << q + 1;
  out << "\n";
  for (int i = 0; i < data.N(); ++i)
    for (int t = 0; t < data.T(); ++t) {
      out << data.unit_ids[i] << "," << data.time_ids[t] << ","
          << detail::format_double(data.Y(t, i));
      for (int q = 0; q < data.p(); ++q)
        out << "," << detail::format_double(data.X[q](t, i));
      out << "\n";
    }
}

inline nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

// Fit artifact: coefficients, membership, loadings, factors, and fit stats.
inline nlohmann::json fit_result_json(const PanelData& data,
                                      const FitResult& fit) {
  nlohmann::json j;
  j["beta"] = std::vector<double>(fit.beta.beta.data(),
                                  fit.beta.beta.data() + fit.beta.beta.size());
  j["k"] = fit.structure.k();
  j["q"] = fit.objective();
  j["ssr"] = fit.objective() / (static_cast<double>(data.T()) * data.N());
  j["iterations"] = fit.n_iter;
  j["converged"] = fit.converged;
  j["objective_trace"] = fit.objective_trace;

  nlohmann::json membership = nlohmann::json::array();
  std::vector<int> row_in_group(fit.structure.k(), 0);
  for (int i = 0; i < data.N(); ++i) {
    const int g = fit.structure.membership[i];
    nlohmann::json unit;
    unit["unit"] = data.unit_ids[i];
    unit["group"] = g + 1;  // groups are reported 1-based
    const Vector lam =
        fit.structure.loadings[g].row(row_in_group[g]).transpose();
    unit["loading"] = std::vector<double>(lam.data(), lam.data() + lam.size());
    ++row_in_group[g];
    membership.push_back(std::move(unit));
  }
  j["units"] = std::move(membership);

  nlohmann::json factors = nlohmann::json::array();
  for (const auto& F : fit.structure.factors)
    factors.push_back(matrix_to_json(F));
  j["factors"] = std::move(factors);

  if (fit.arrangement) {
    nlohmann::json bases = nlohmann::json::array();
    for (const auto& b : fit.arrangement->bases) {
      nlohmann::json jb;
      jb["dim"] = b.dim;
      jb["complement"] = matrix_to_json(b.complement);
      bases.push_back(std::move(jb));
    }
    j["subspace_complements"] = std::move(bases);
  }
  return j;
}

inline void write_membership_csv(const PanelData& data, const FitResult& fit,
                                 const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write file: " + path);
  out << "unit,group\n";
  for (int i = 0; i < data.N(); ++i)
    out << data.unit_ids[i] << "," << fit.structure.membership[i] + 1 << "\n";
}

struct ReportRow {
  std::string setting;
  std::string dims;
  std::string parameter;
  double bias = 0.0;
  double rmse = 0.0;
  double misclass = 0.0;
  int n_reps = 0;
  int n_failed = 0;
};

inline std::vector<ReportRow> report_rows(const std::string& setting,
                                          const std::vector<int>& dims,
                                          const ReplicationReport& rep) {
  std::string dims_str;
  for (std::size_t j = 0; j < dims.size(); ++j)
    dims_str += (j ? "-" : "") + std::to_string(dims[j]);
  std::vector<ReportRow> rows;
  for (Eigen::Index q = 0; q < rep.bias.size(); ++q) {
    ReportRow row;
    row.setting = setting;
    row.dims = dims_str;
    row.parameter = "beta" + std::to_string(q + 1);
    row.bias = rep.bias(q);
    row.rmse = rep.rmse(q);
    row.misclass = rep.mean_misclass;
    row.n_reps = rep.n_reps;
    row.n_failed = rep.n_failed;
    rows.push_back(std::move(row));
  }
  if (rows.empty()) {  // covariate-free runs still report the misclass rate
    ReportRow row;
    row.setting = setting;
    row.dims = dims_str;
    row.parameter = "none";
    row.misclass = rep.mean_misclass;
    row.n_reps = rep.n_reps;
    row.n_failed = rep.n_failed;
    rows.push_back(std::move(row));
  }
  return rows;
}

inline void write_report_csv(const std::vector<ReportRow>& rows,
                             const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write file: " + path);
  out << "setting,dims,parameter,bias,rmse,misclass,n_reps,n_failed\n";
  for (const auto& r : rows)
    out << r.setting << "," << r.dims << "," << r.parameter << ","
        << detail::format_double(r.bias) << "," << detail::format_double(r.rmse)
        << "," << detail::format_double(r.misclass) << "," << r.n_reps << ","
        << r.n_failed << "\n";
}

inline nlohmann::json report_json(const std::vector<ReportRow>& rows,
                                  const ReplicationReport& rep) {
  nlohmann::json j;
  nlohmann::json jrows = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json jr;
    jr["setting"] = r.setting;
    jr["dims"] = r.dims;
    jr["parameter"] = r.parameter;
    jr["bias"] = r.bias;
    jr["rmse"] = r.rmse;
    jr["misclass"] = r.misclass;
    jr["n_reps"] = r.n_reps;
    jr["n_failed"] = r.n_failed;
    jrows.push_back(std::move(jr));
  }
  j["rows"] = std::move(jrows);
  nlohmann::json diag = nlohmann::json::array();
  for (const auto& d : rep.reps) {
    nlohmann::json jd;
    jd["q"] = d.q;
    jd["iterations"] = d.n_iter;
    jd["converged"] = d.converged;
    jd["misclass"] = d.misclass;
    jd["failed"] = d.failed;
    if (d.failed) jd["error"] = d.error;
    diag.push_back(std::move(jd));
  }
  j["replications"] = std::move(diag);
  return j;
}

inline void write_json(const nlohmann::json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write file: " + path);
  out << j.dump(2) << "\n";
}

}  // namespace lssc
