"""
System specifications for N-mode dissipative linear bosonic systems.

A ModelSpec holds mode frequencies, coherent couplings, the damping matrix
and the thermal occupation. Validation checks the Lindblad admissibility of
the damping matrix; config documents are parsed through a pydantic schema.
"""

import json
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .config import HERMITIAN_RTOL, PSD_RTOL
from .errors import ConfigSchemaError, ModelValidationError
from .runtime import get_logger

logger = get_logger()


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """N-mode linear bosonic system: ω_k, χ_jk, γ_jk and n_th."""

    omega: np.ndarray
    chi: np.ndarray
    gamma: np.ndarray
    n_th: float = 0.0

    def __post_init__(self):
        omega = np.array(self.omega, dtype=float).reshape(-1)
        n = omega.shape[0]
        chi = self.chi
        if chi is None:
            chi = np.zeros((n, n), dtype=complex)
        chi = np.array(chi, dtype=complex)
        gamma = np.array(self.gamma, dtype=complex)
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "chi", chi)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "n_th", float(self.n_th))
        for array in (omega, chi, gamma):
            array.setflags(write=False)

    @property
    def n_modes(self) -> int:
        return int(self.omega.shape[0])

    @property
    def hamiltonian(self) -> np.ndarray:
        """Coherent part H_c: ω on the diagonal, χ off the diagonal."""
        h = np.array(self.chi, dtype=complex)
        np.fill_diagonal(h, self.omega)
        return h

    def replace(self, **changes) -> "ModelSpec":
        fields = {"omega": self.omega, "chi": self.chi, "gamma": self.gamma, "n_th": self.n_th}
        fields.update(changes)
        return ModelSpec(**fields)

    def __eq__(self, other):
        if not isinstance(other, ModelSpec):
            return NotImplemented
        return (
            self.n_th == other.n_th
            and self.omega.shape == other.omega.shape
            and self.chi.shape == other.chi.shape
            and self.gamma.shape == other.gamma.shape
            and np.array_equal(self.omega, other.omega)
            and np.array_equal(self.chi, other.chi)
            and np.array_equal(self.gamma, other.gamma)
        )

    def __hash__(self):
        return hash((self.n_th, self.omega.tobytes(), self.chi.tobytes(), self.gamma.tobytes()))


@dataclass(frozen=True)
class BimodalPreset:
    """Two modes with equal inner decay γ and incoherent coupling γ₁₂."""

    omega1: float
    omega2: float
    gamma_loss: float
    gamma12: float
    n_th: float = 0.0

    @property
    def delta(self) -> float:
        return self.omega1 - self.omega2

    @property
    def omega_bar(self) -> float:
        return 0.5 * (self.omega1 + self.omega2)

    def to_model(self) -> ModelSpec:
        return make_bimodal(self.omega1, self.omega2, self.gamma_loss, self.gamma12, self.n_th)


@dataclass(frozen=True, eq=False)
class ValidatedModel:
    """A ModelSpec that passed validation, with its jump-rate spectrum."""

    spec: ModelSpec
    jump_rates: np.ndarray
    jump_modes: np.ndarray

    @property
    def n_modes(self) -> int:
        return self.spec.n_modes

    def __eq__(self, other):
        if not isinstance(other, ValidatedModel):
            return NotImplemented
        return self.spec == other.spec


PRESETS: Dict[str, BimodalPreset] = {
    "bimodal-ep": BimodalPreset(omega1=-0.5, omega2=0.5, gamma_loss=3.0, gamma12=1.0, n_th=0.0),
}

# Alternate CLI spellings of the preset names.
PRESET_ALIASES: Dict[str, str] = {"fig1": "bimodal-ep"}


def make_bimodal(omega1: float, omega2: float, gamma_loss: float, gamma12: float,
                 n_th: float = 0.0) -> ModelSpec:
    """
    Build the two-mode model with gamma = [[γ, γ₁₂], [γ₁₂, γ]] and no χ.

    Raises:
        ModelValidationError: γ ≤ 0 or |γ₁₂| > γ
    """
    violations = []
    if not gamma_loss > 0:
        violations.append(f"gamma_loss must be > 0, got {gamma_loss!r}")
    if abs(gamma12) > gamma_loss:
        violations.append(
            f"damping matrix not PSD: |gamma12| = {abs(gamma12)!r} exceeds gamma_loss = {gamma_loss!r}"
        )
    if violations:
        raise ModelValidationError(violations)
    return ModelSpec(
        omega=[omega1, omega2],
        chi=np.zeros((2, 2), dtype=complex),
        gamma=[[gamma_loss, gamma12], [gamma12, gamma_loss]],
        n_th=n_th,
    )


def _hermiticity_violation(name: str, matrix: np.ndarray) -> Optional[str]:
    scale = max(float(np.max(np.abs(matrix))), np.finfo(float).tiny)
    deviation = np.abs(matrix - matrix.conj().T)
    worst = float(deviation.max())
    if worst > HERMITIAN_RTOL * scale:
        j, k = np.unravel_index(int(np.argmax(deviation)), deviation.shape)
        return (f"{name} not Hermitian: {name}[{j},{k}] = {matrix[j, k]!r} vs "
                f"conj({name}[{k},{j}]) = {np.conj(matrix[k, j])!r} (deviation {worst:.3e})")
    return None


def validate(spec: ModelSpec) -> ValidatedModel:
    """
    Check every ModelSpec invariant and attach the jump-rate spectrum.

    All violations are collected before raising, each naming the offending
    entry and its magnitude.

    Raises:
        ModelValidationError: listing every violated invariant
    """
    violations = []
    n = spec.n_modes
    if n < 1:
        violations.append("n_modes must be ≥ 1")
        raise ModelValidationError(violations)

    for name, matrix in (("chi", spec.chi), ("gamma", spec.gamma)):
        if matrix.shape != (n, n):
            violations.append(f"{name} has shape {matrix.shape}, expected ({n}, {n})")
    if violations:
        raise ModelValidationError(violations)

    for name, array in (("omega", spec.omega), ("chi", spec.chi), ("gamma", spec.gamma)):
        if not np.all(np.isfinite(array)):
            violations.append(f"{name} contains non-finite entries")
    if not math.isfinite(spec.n_th) or spec.n_th < 0:
        violations.append(f"n_th must be ≥ 0, got {spec.n_th!r}")
    if violations:
        raise ModelValidationError(violations)

    for name, matrix in (("chi", spec.chi), ("gamma", spec.gamma)):
        message = _hermiticity_violation(name, matrix)
        if message:
            violations.append(message)
    if np.any(np.abs(np.diag(spec.chi)) > 0):
        violations.append("chi must have a zero diagonal (mode frequencies live in omega)")

    rates, modes = np.linalg.eigh(0.5 * (spec.gamma + spec.gamma.conj().T))
    gamma_norm = float(np.linalg.norm(spec.gamma, 2))
    if rates.size and rates[0] < -PSD_RTOL * gamma_norm:
        violations.append(
            f"gamma not positive semidefinite: smallest eigenvalue {rates[0]:.12g}"
        )

    if violations:
        logger.warning("model_validation_failed", violations=violations)
        raise ModelValidationError(violations)

    return ValidatedModel(spec=spec, jump_rates=np.clip(rates, 0.0, None), jump_modes=modes)


def ensure_validated(model: Union[ModelSpec, ValidatedModel]) -> ValidatedModel:
    if isinstance(model, ValidatedModel):
        return model
    return validate(model)


def supermode_model(model: Union[ModelSpec, ValidatedModel], theta: float = math.pi / 4) -> ModelSpec:
    """
    Two-mode model rewritten in the rotated basis c = R(θ)·a.

    R = [[cos θ, −sin θ], [sin θ, cos θ]], so at θ = π/4 the symmetric
    damping matrix becomes diag(γ − γ₁₂, γ + γ₁₂) and the frequency
    detuning turns into a coherent coupling Δ/2 between c₁ and c₂.
    """
    spec = model.spec if isinstance(model, ValidatedModel) else model
    if spec.n_modes != 2:
        raise ValueError(f"supermodes are defined for two modes, got {spec.n_modes}")
    c, s = math.cos(theta), math.sin(theta)
    rotation = np.array([[c, -s], [s, c]])
    h = rotation @ spec.hamiltonian @ rotation.T
    gamma = rotation @ spec.gamma @ rotation.T
    chi = h.copy()
    np.fill_diagonal(chi, 0.0)
    # The rotated Hamiltonian stays Hermitian, so its diagonal is real.
    return ModelSpec(omega=np.diag(h).real, chi=chi, gamma=gamma, n_th=spec.n_th)


# ---------------------------------------------------------------------------
# Config documents
# ---------------------------------------------------------------------------

ComplexEntry = Union[float, Tuple[float, float]]


class _ModeEntry(BaseModel):
    model_config = ConfigDict(extra="forbid")

    omega: float


class _FullDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    modes: List[_ModeEntry]
    chi: Optional[List[List[ComplexEntry]]] = None
    gamma: List[List[ComplexEntry]]
    n_th: float = Field(default=0.0, ge=0.0)


class _BimodalBlock(BaseModel):
    model_config = ConfigDict(extra="forbid")

    omega1: float
    omega2: float
    gamma: float = Field(gt=0.0)
    gamma12: float
    n_th: float = Field(default=0.0, ge=0.0)


class _BimodalDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    bimodal: _BimodalBlock


def _json_path(loc: Sequence) -> str:
    path = "$"
    for part in loc:
        path += f"[{part}]" if isinstance(part, int) else f".{part}"
    return path


def _to_complex_matrix(rows: List[List[ComplexEntry]], name: str, n: int) -> np.ndarray:
    if len(rows) != n or any(len(row) != n for row in rows):
        shape = f"{len(rows)}×{len(rows[0]) if rows else 0}"
        raise ConfigSchemaError(
            f"dimension mismatch: {name} is {shape} but omega has length {n}", f"$.{name}"
        )
    matrix = np.zeros((n, n), dtype=complex)
    for j, row in enumerate(rows):
        for k, entry in enumerate(row):
            if isinstance(entry, tuple):
                matrix[j, k] = complex(entry[0], entry[1])
            else:
                matrix[j, k] = complex(entry, 0.0)
    return matrix


def parse_config(text: str) -> ModelSpec:
    """
    Parse a JSON config document into a ModelSpec.

    Accepts the full form ``{"modes": [...], "chi": ..., "gamma": ..., "n_th": f}``
    or the shorthand ``{"bimodal": {...}}``. Complex matrix entries are
    written as ``[re, im]`` pairs or plain numbers.

    Raises:
        ConfigSchemaError: malformed JSON, unknown keys, wrong types or
            mismatched dimensions, with the JSON path of the problem
    """
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigSchemaError(f"invalid JSON: {e.msg} (line {e.lineno}, column {e.colno})") from e
    if not isinstance(document, dict):
        raise ConfigSchemaError("document must be a JSON object")

    try:
        if "bimodal" in document:
            block = _BimodalDocument.model_validate(document).bimodal
            return ModelSpec(
                omega=[block.omega1, block.omega2],
                chi=np.zeros((2, 2), dtype=complex),
                gamma=[[block.gamma, block.gamma12], [block.gamma12, block.gamma]],
                n_th=block.n_th,
            )
        parsed = _FullDocument.model_validate(document)
    except ValidationError as e:
        first = e.errors()[0]
        raise ConfigSchemaError(first["msg"], _json_path(first["loc"])) from e

    n = len(parsed.modes)
    if n < 1:
        raise ConfigSchemaError("n_modes must be ≥ 1", "$.modes")
    omega = [mode.omega for mode in parsed.modes]
    gamma = _to_complex_matrix(parsed.gamma, "gamma", n)
    chi = (_to_complex_matrix(parsed.chi, "chi", n) if parsed.chi is not None
           else np.zeros((n, n), dtype=complex))
    return ModelSpec(omega=omega, chi=chi, gamma=gamma, n_th=parsed.n_th)


def _complex_rows(matrix: np.ndarray) -> List[List[List[float]]]:
    return [[[float(z.real), float(z.imag)] for z in row] for row in matrix]


def model_document(model: Union[ModelSpec, ValidatedModel]) -> dict:
    """The full-form config document of a model as a plain dict."""
    spec = model.spec if isinstance(model, ValidatedModel) else model
    return {
        "modes": [{"omega": float(w)} for w in spec.omega],
        "chi": _complex_rows(spec.chi),
        "gamma": _complex_rows(spec.gamma),
        "n_th": float(spec.n_th),
    }


def serialize_config(model: Union[ModelSpec, ValidatedModel]) -> str:
    """Canonical full-form JSON; parse_config inverts it bit-exactly."""
    return json.dumps(model_document(model), indent=2, sort_keys=True)


def load_model(path: Optional[str] = None, preset: Optional[str] = None,
               n_th: Optional[float] = None) -> ValidatedModel:
    """Load a model from a config file or a named preset and validate it."""
    if path:
        try:
            with open(path, encoding="utf-8") as handle:
                spec = parse_config(handle.read())
        except OSError as e:
            raise ConfigSchemaError(f"cannot read model file: {e.strerror}", path) from e
    else:
        name = preset or "bimodal-ep"
        name = PRESET_ALIASES.get(name, name)
        if name not in PRESETS:
            raise ConfigSchemaError(f"unknown preset {name!r}; known: {', '.join(sorted(PRESETS))}")
        spec = PRESETS[name].to_model()
    if n_th is not None:
        spec = spec.replace(n_th=n_th)
    model = validate(spec)
    logger.info("model_loaded", source=path or preset or "bimodal-ep", n_modes=model.n_modes)
    return model
