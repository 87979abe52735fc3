"""Run configuration: an INI file parsed strictly (unknown sections or keys are errors).

Example::

    [model]
    variant = A
    bc = dirichlet
    omega = 1.0
    h_kind = polynomial
    h_coeffs = 0, 1, 0, 0.1
    forcing =
        1  | 1 | 0.05 | 0
        -1 | 1 | 0.05 | 0

    [truncation]
    K_theta = 16
    N_x = 16

    [fixedpoint]
    eps = 0.05

Forcing lines are ``k | mode | re | im``.  ``k`` is comma separated for
d > 1.  The value multiplies exp(2 pi i k.theta) times the classical
profile of the mode: sin(pi n x) for Dirichlet (n >= 1), cos(pi n x) for
Neumann (n >= 0), and 1 / cos(2 pi m x) / sin(2 pi m x) for periodic
(labels 0, c<m>, s<m>).
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .explorer import ScanGrid
from .fixedpoint import FixedPointConfig
from .operators import DomainSpec, ModelSpec
from .spectral import (
    DIRICHLET,
    NEUMANN,
    Frequency,
    Nonlinearity,
    NormParams,
    SpectralError,
    SpectralField,
    Truncation,
    basis_tables,
    normalize_bc,
)


class ConfigError(SpectralError):
    """Malformed or unknown configuration content."""


SCHEMA = {
    "model": {"variant", "bc", "omega", "omega_k_check", "omega_resonance_tol", "h_kind", "h_coeffs",
              "h_gamma", "h_pole_guard", "h_neumann_compatible", "forcing"},
    "truncation": {"k_theta", "n_x", "oversample"},
    "norm": {"rho", "j", "m"},
    "domain": {"kind", "sigma", "b", "delta"},
    "fixedpoint": {"eps", "tol", "max_iter", "alpha0", "beta", "multiplier_floor", "m_start",
                   "c0_starts", "c0_rule", "alpha0_u0"},
    "lindstedt": {"m", "enforce_nonresonance", "k_scan", "ladder"},
    "scan": {"re_min", "re_max", "im_min", "im_max", "nx", "ny", "k_range", "n_max"},
    "gamma": {"eps", "tau_samples"},
}


@dataclass(frozen=True, eq=False)
class RunConfig:
    model: ModelSpec
    params: NormParams
    domain: Optional[DomainSpec]
    fixedpoint: FixedPointConfig
    eps: Optional[complex]
    M: int
    M_start: Optional[int]
    enforce_nonresonance: bool
    K_scan: int
    ladder: tuple
    c0_starts: int
    c0_rule: str
    alpha0_u0: float
    scan: Optional[ScanGrid]
    k_range: int
    n_max: Optional[int]
    gamma_eps: tuple
    tau_samples: int
    text: str = ""
    extras: dict = field(default_factory=dict)


def _floats(s: str):
    return [float(t) for t in s.replace(";", ",").split(",") if t.strip()]


def parse_complex(s: str) -> complex:
    try:
        return complex(s.strip().replace(" ", "").replace("i", "j"))
    except ValueError:
        raise ConfigError(f"cannot parse complex number {s!r}") from None


def _bool(s: str) -> bool:
    key = s.strip().lower()
    if key in ("1", "true", "yes", "on"):
        return True
    if key in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"cannot parse boolean {s!r}")


def mode_entry(bc: str, label: str, trunc: Truncation):
    """Basis index and normalization factor for a classical mode label."""
    bas = basis_tables(bc, trunc)
    key = label.strip().lower()
    s2 = 1.0 / math.sqrt(2.0)
    if bc == DIRICHLET:
        key = key[3:] if key.startswith("sin") else key
        n = int(key)
        if not 1 <= n <= trunc.N_x:
            raise ConfigError(f"Dirichlet mode {label!r} outside 1..{trunc.N_x}")
        return n - 1, s2
    if bc == NEUMANN:
        key = "0" if key == "const" else key
        key = key[3:] if key.startswith("cos") else key
        n = int(key)
        if not 0 <= n < trunc.N_x:
            raise ConfigError(f"Neumann mode {label!r} outside 0..{trunc.N_x - 1}")
        return n, (1.0 if n == 0 else s2)
    key = {"const": "0"}.get(key, key)
    if key.startswith("cos"):
        key = "c" + key[3:]
    elif key.startswith("sin"):
        key = "s" + key[3:]
    try:
        idx = bas.label_index(key)
    except SpectralError as exc:
        raise ConfigError(str(exc)) from None
    return idx, (1.0 if key == "0" else s2)


def parse_forcing(text: str, trunc: Truncation) -> SpectralField:
    modes = []
    for line in text.strip().splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split("|")]
        if len(parts) != 4:
            raise ConfigError(f"forcing entry {line!r} is not 'k | mode | re | im'")
        k = tuple(int(c) for c in parts[0].split(","))
        if len(k) != trunc.d:
            raise ConfigError(f"forcing wave vector {k} does not have d = {trunc.d} entries")
        if max(abs(c) for c in k) > trunc.K_theta:
            raise ConfigError(f"forcing wave vector {k} exceeds K_theta = {trunc.K_theta}")
        n, fac = mode_entry(trunc.bc, parts[1], trunc)
        modes.append((k, n, complex(float(parts[2]), float(parts[3])) * fac))
    return SpectralField.from_modes(trunc, modes)


def _nonlinearity(sec) -> Nonlinearity:
    kind = sec.get("h_kind", "polynomial").strip().lower()
    kw = {"neumann_compatible": _bool(sec.get("h_neumann_compatible", "true"))}
    if "h_pole_guard" in sec:
        kw["pole_guard"] = float(sec["h_pole_guard"])
    if kind == "polynomial":
        if "h_coeffs" not in sec:
            raise ConfigError("[model] h_coeffs is required for a polynomial nonlinearity")
        return Nonlinearity.polynomial(*_floats(sec["h_coeffs"]), **kw)
    if kind == "mems":
        return Nonlinearity.mems(float(sec.get("h_gamma", "1.0")), **kw)
    if kind == "custom":
        raise ConfigError("custom nonlinearities are only available from the Python API")
    raise ConfigError(f"unknown h_kind {kind!r}")


def _domain(cp) -> Optional[DomainSpec]:
    if not cp.has_section("domain"):
        return None
    sec = cp["domain"]
    kind = sec.get("kind", "none").strip().lower()
    if kind == "none":
        return None
    if kind == "parabolic":
        return DomainSpec.parabolic(float(sec["sigma"]), float(sec["b"]))
    if kind == "sector":
        return DomainSpec.sector(float(sec["delta"]))
    raise ConfigError(f"unknown domain kind {kind!r}")


def parse_config(text: str, strict: bool = True) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = lambda s: s.strip().lower()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    for name in cp.sections():
        if name not in SCHEMA:
            raise ConfigError(f"unknown section [{name}]")
        bad = set(cp[name].keys()) - SCHEMA[name]
        if bad:
            raise ConfigError(f"unknown key(s) in [{name}]: {', '.join(sorted(bad))}")
    for need in ("model", "truncation"):
        if not cp.has_section(need):
            raise ConfigError(f"missing section [{need}]")
    try:
        return _build(cp, text, strict)
    except (KeyError, ValueError) as exc:
        if isinstance(exc, SpectralError):
            raise
        raise ConfigError(f"bad config value: {exc}") from None


def _build(cp, text: str, strict: bool) -> RunConfig:
    ms, ts = cp["model"], cp["truncation"]
    omega = Frequency(tuple(_floats(ms["omega"])), K_check=int(ms.get("omega_k_check", "64")),
                      resonance_tol=float(ms.get("omega_resonance_tol", "1e-12")))
    bc = normalize_bc(ms.get("bc", DIRICHLET))
    trunc = Truncation(int(ts["k_theta"]), int(ts["n_x"]), bc, d=omega.d,
                       oversample=int(ts.get("oversample", "2")))
    forcing = parse_forcing(ms.get("forcing", ""), trunc)
    model = ModelSpec(ms["variant"], _nonlinearity(ms), forcing, omega)

    ns = cp["norm"] if cp.has_section("norm") else {}
    params = NormParams(float(ns.get("rho", "0.05")), int(ns.get("j", "2")), int(ns.get("m", "2")))
    domain = _domain(cp)

    fs = cp["fixedpoint"] if cp.has_section("fixedpoint") else {}
    fp = FixedPointConfig(
        tol=float(fs.get("tol", "1e-12")), max_iter=int(fs.get("max_iter", "200")),
        alpha0=float(fs.get("alpha0", "1e3")),
        beta=float(fs["beta"]) if "beta" in fs else None, params=params, strict=strict,
        domain=domain, multiplier_floor=float(fs.get("multiplier_floor", "1e-12")),
    )
    eps = parse_complex(fs["eps"]) if "eps" in fs else None

    ls = cp["lindstedt"] if cp.has_section("lindstedt") else {}
    M = int(ls.get("m", "3"))
    ladder = tuple(_floats(ls["ladder"])) if "ladder" in ls else tuple(2.0 ** -p for p in range(10, 3, -1))

    scan = None
    ss = cp["scan"] if cp.has_section("scan") else {}
    if cp.has_section("scan") and "re_min" in ss:
        scan = ScanGrid(float(ss["re_min"]), float(ss["re_max"]), float(ss["im_min"]),
                        float(ss["im_max"]), int(ss.get("nx", "11")), int(ss.get("ny", "11")))

    gs = cp["gamma"] if cp.has_section("gamma") else {}
    gamma_eps = tuple(parse_complex(t) for t in gs.get("eps", "").split(",") if t.strip())

    return RunConfig(
        model=model, params=params, domain=domain, fixedpoint=fp, eps=eps, M=M,
        M_start=int(fs["m_start"]) if "m_start" in fs else None,
        enforce_nonresonance=_bool(ls.get("enforce_nonresonance", "true")),
        K_scan=int(ls.get("k_scan", str(max(1, trunc.d * trunc.K_theta)))),
        ladder=ladder,
        c0_starts=int(fs.get("c0_starts", "1")), c0_rule=fs.get("c0_rule", "smallest").strip(),
        alpha0_u0=float(fs.get("alpha0_u0", "10.0")),
        scan=scan, k_range=int(ss.get("k_range", str(trunc.K_theta))),
        n_max=int(ss["n_max"]) if "n_max" in ss else None,
        gamma_eps=gamma_eps, tau_samples=int(gs.get("tau_samples", "4001")),
        text=text,
    )


def load_config(path, strict: bool = True) -> RunConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file {p} not found")
    return parse_config(p.read_text(), strict=strict)
