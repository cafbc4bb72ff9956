#pragma once

#include "fopsim/fop_tracer.hpp"
#include "fopsim/frontend_stack.hpp"

namespace fopsim {

// Cladding index that gives the requested acceptance half-angle.
double clad_index_for_acceptance(double n_core, double acceptance_deg, double n0 = 1.0);

// 250 um plate with 20 um cores on a 27 um pitch (FF 50 %, alpha 10.2 deg);
// the baseline of the parameter sweeps.
FopDesign reference_design();

// 500 um low-NA plate: 9 um cores, 11 um pitch, n_core 1.51, effective
// acceptance fitted to a measured 8.3 deg FWHM, lossy cores.
FopDesign low_na_design();

// 500 um high-NA plate: 14.5 um cores, 20 um pitch, n_core 1.57, effective
// acceptance fitted to a measured 45.7 deg FWHM.
FopDesign high_na_design();

// Lumped scatter calibrated on the low-NA stack at 660 nm (filter-last OD 3.7
// at normal incidence, filter-first OD 5 at 45 deg).
FrontendConfig low_na_frontend();
FrontendConfig high_na_frontend();

// Scatter solved on the low-NA stack at 660 nm (filter-last OD 3.7 at 0 deg,
// filter-first OD 5 at 45 deg) with default sampling and seed 0.
inline constexpr ScatterCalibration kCalibratedScatter{1.05196e-05, 1.16952e-03};

inline constexpr double kLowNaFwhmDeg = 8.3;
inline constexpr double kHighNaFwhmDeg = 45.7;
inline constexpr double kExcitationLowNa = 660.0;
inline constexpr double kExcitationHighNa = 635.0;
inline constexpr double kEmissionNm = 694.0;

}  // namespace fopsim
