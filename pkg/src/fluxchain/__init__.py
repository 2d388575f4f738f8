"""fluxchain: simulation and analysis of QFP-mediated flux-qubit readout.

Physics conventions: fluxes dimensionless in Phi0 units, everything else
SI; Hamiltonian coefficient files in GHz with h = 1.
"""

__version__ = "0.1.0"

from .anneal import (AnnealTrace, LatchState, double_well_onset, potential,
                     run_scurve_experiment, scurve_schedule, simulate_anneal)
from .device import (BiasSchedule, DeviceParams, FluxBias, default_device,
                     eval_schedule, load_device, serialize_device)
from .errors import (CalibrationError, ConfigError, ConvergenceError,
                     FitError, FluxchainError, ModelError)
from .hamiltonian import (AntiCrossing, NormalModeHamiltonian, SpectrumResult,
                          anticrossing_gap, assemble, build_mode_ops,
                          combined_t1, eigensolve_lowest, purcell_t1,
                          two_mode_spectrum)
from .qfp import (SCurveFit, SeparationReport, beta_l, effective_mutual,
                  fit_scurve, qubit_flux_signal, required_ratio, scurve_prob,
                  separation_fidelity, susceptibility)
from .readout import (GaussianPeak, HistogramAnalysis, ReadoutModel,
                      ShotRecord, analyze_histograms, calibrate_noise,
                      calibrate_prep, fidelity_vs_time,
                      readout_model_from_device, simulate_shot, simulate_shots)
from .resonator import (ResonatorModel, S21Fit, StateShift, calibrate_f_bare,
                        decay_rate, fit_s21, flux_sensitivity, resonant_freq,
                        s21_model, squid_phase, state_shift)
from .units import PHI0
