#include "fopsim/angular_response.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>

#include "fopsim/csv.hpp"
#include "fopsim/errors.hpp"

namespace fopsim {

void AngularResponse::validate() const {
  if (theta_deg.empty()) throw InvalidDesign("angular response is empty");
  if (theta_deg.size() != transmittance.size())
    throw InvalidDesign("angle and transmittance grids differ in length");
  for (std::size_t i = 0; i < theta_deg.size(); ++i) {
    if (!(theta_deg[i] >= 0.0 && theta_deg[i] <= 90.0))
      throw InvalidDesign("angles must lie in [0, 90] degrees");
    if (i > 0 && !(theta_deg[i] > theta_deg[i - 1]))
      throw InvalidDesign("angles must be strictly increasing");
    if (!(transmittance[i] >= 0.0 && transmittance[i] <= 1.0))
      throw InvalidDesign("transmittance must lie in [0, 1]");
  }
}

double AngularResponse::peak() const {
  return *std::max_element(transmittance.begin(), transmittance.end());
}

double AngularResponse::at(double theta) const {
  if (theta_deg.size() == 1 && theta == theta_deg.front()) return transmittance.front();
  const double eps = 1e-9;
  if (theta < theta_deg.front() - eps || theta > theta_deg.back() + eps)
    throw DomainError("angle " + std::to_string(theta) + " outside sampled range [" +
                      std::to_string(theta_deg.front()) + ", " +
                      std::to_string(theta_deg.back()) + "]");
  theta = std::clamp(theta, theta_deg.front(), theta_deg.back());
  auto it = std::upper_bound(theta_deg.begin(), theta_deg.end(), theta);
  if (it == theta_deg.end()) return transmittance.back();
  const std::size_t i = static_cast<std::size_t>(it - theta_deg.begin());
  if (i == 0) return transmittance.front();
  const double t = (theta - theta_deg[i - 1]) / (theta_deg[i] - theta_deg[i - 1]);
  return transmittance[i - 1] + t * (transmittance[i] - transmittance[i - 1]);
}

std::vector<double> linear_grid(double start, double stop, double step) {
  if (!(step > 0.0) || stop < start) throw DomainError("invalid grid");
  const auto n = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
  std::vector<double> grid(n);
  for (std::size_t i = 0; i < n; ++i) grid[i] = start + step * static_cast<double>(i);
  return grid;
}

void write_response_csv(std::ostream& out, const AngularResponse& r) {
  csv::write_header(out, {"theta_deg", "transmittance"});
  for (std::size_t i = 0; i < r.size(); ++i)
    csv::write_row(out, {csv::format_number(r.theta_deg[i]), csv::format_number(r.transmittance[i])});
}

AngularResponse read_response_csv(std::istream& in) {
  const auto table = csv::read_table(in);
  const auto ct = table.column("theta_deg");
  const auto cv = table.column("transmittance");
  AngularResponse r;
  for (const auto& row : table.rows) {
    r.theta_deg.push_back(row[ct]);
    r.transmittance.push_back(row[cv]);
  }
  r.validate();
  return r;
}

AngularResponse read_response_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  return read_response_csv(in);
}

}  // namespace fopsim
