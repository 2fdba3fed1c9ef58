"""Simulation and analysis of temporal fading on fixed wireless links."""

from .channel import (ClassicalRicianParams, DelayGrid, IRSnapshot, eval_classical,
                      eval_temporal, impulse_response, path_phase)
from .errors import (ConfigError, DegenerateError, GeometryError, NoLOSError, TempfadeError,
                     TimeRangeError, TraceFormatError)
from .estimator import (DynamicRicianTrack, RicianFit, correlation, fit_rician_mle,
                        rssi_error_stats, stationarity_check, track)
from .ir import Label, PathTrack, analyze_ir_run, associate_tracks, classify_tracks, detect_peaks
from .link import IQTrace, WaveformConfig, simulate_link
from .scenario import MovingObject, PathKind, Scenario, resolve_scene, rolling_mill_vehicle

__version__ = "0.1.0"
