#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace fopsim {

// Transmittance sampled against angle of incidence. Shared by the tracer, the
// frontend composition and the imaging pipeline.
struct AngularResponse {
  std::vector<double> theta_deg;
  std::vector<double> transmittance;
  double wavelength_nm = 660.0;
  std::uint64_t samples = 0;
  std::uint64_t seed = 0;

  void validate() const;
  std::size_t size() const { return theta_deg.size(); }
  double max_theta() const { return theta_deg.back(); }
  double peak() const;

  // Linear interpolation; throws DomainError outside the sampled range.
  double at(double theta_deg) const;
};

std::vector<double> linear_grid(double start, double stop, double step);

// CSV with header `theta_deg,transmittance`.
void write_response_csv(std::ostream& out, const AngularResponse& response);
AngularResponse read_response_csv(std::istream& in);
AngularResponse read_response_csv(const std::string& path);

}  // namespace fopsim
