"""Fock-space simulation of an overlap-free two-photon Mach-Zehnder interferometer."""

from .analysis import FitReport, fit_envelope, fit_fringe, hom_visibility, visibility
from .config import load_config, parse_config, parse_scenario
from .elements import BS1, BS2, BS_CONVENTION, Circuit, apply_circuit, mz_circuit
from .experiment import Scenario, SourceKind, ScanResult, ghz_to_noon, hom_scan, mix_at_bs1, scan
from .fock import FockState, ModeLabel, Path, Pol, StateEnsemble, make_state, mode, project, vacuum
from .spectral import SpectralModel, temporal_overlap

__version__ = "0.1.0"

__all__ = [
    "BS1", "BS2", "BS_CONVENTION", "Circuit", "FitReport", "FockState", "ModeLabel", "Path", "Pol",
    "ScanResult", "Scenario", "SourceKind", "SpectralModel", "StateEnsemble", "apply_circuit",
    "fit_envelope", "fit_fringe", "ghz_to_noon", "hom_scan", "hom_visibility", "load_config",
    "make_state", "mix_at_bs1", "mode", "mz_circuit", "parse_config", "parse_scenario", "project",
    "scan", "temporal_overlap", "vacuum", "visibility",
]
