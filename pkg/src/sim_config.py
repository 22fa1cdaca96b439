"""
Simulation configuration: one JSON document, validated before anything is allocated
"""
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from src.config import (
    DEFAULT_ALPHA, DEFAULT_J_FLOOR, DEFAULT_LX, DEFAULT_LY, DEFAULT_SEED, DEFAULT_TOL_ENERGY, DEFAULT_TOL_ODE,
    DEFAULT_TOL_SOLVER, MIN_FLUID_LAYERS, MIN_PLATE_POINTS, OUTPUT_DIR,
)
from src.exceptions import ConfigValidationError
from src.plate_models import MODEL_KINDS
from src.profiles import validate_profile

SECTIONS = ('name', 'geometry', 'physics', 'plate', 'initial', 'run', 'tolerances', 'output', 'debug')
OUTPUT_FORMATS = ('csv', 'json', 'npz')


@dataclass(frozen=True)
class GeometryConfig:
    Lx: float = DEFAULT_LX
    Ly: float = DEFAULT_LY
    nx: int = 16
    ny: int = 16
    nz: int = 8


@dataclass(frozen=True)
class PhysicsConfig:
    mu: float = 1.0


@dataclass(frozen=True)
class PlateConfig:
    model: str = 'kirchhoff'
    params: Dict = field(default_factory=dict)
    h: Optional[Dict] = None
    F0: Optional[Dict] = None
    kappa: Optional[float] = None
    C_star: Optional[float] = None
    gamma_prime: Optional[float] = None
    a: Optional[float] = None
    eps: Optional[float] = None
    alpha: float = DEFAULT_ALPHA


@dataclass(frozen=True)
class InitialConfig:
    eta0: Optional[Dict] = None
    v0: Optional[Dict] = None


@dataclass(frozen=True)
class RunConfig:
    T: float = 0.05
    k: int = 4
    N_user: Optional[int] = None
    strict: bool = True
    j_floor: float = DEFAULT_J_FLOOR
    seed: int = DEFAULT_SEED


@dataclass(frozen=True)
class ToleranceConfig:
    tol_energy: float = DEFAULT_TOL_ENERGY
    tol_ode: float = DEFAULT_TOL_ODE
    tol_solver: float = DEFAULT_TOL_SOLVER


@dataclass(frozen=True)
class OutputConfig:
    dir: str = OUTPUT_DIR
    formats: Tuple[str, ...] = ('csv', 'json')
    basis_cache: Optional[str] = None
    database_url: Optional[str] = None


@dataclass(frozen=True)
class DebugConfig:
    corrupt_convection_sign: bool = False
    dump_system: bool = False


@dataclass(frozen=True)
class SimConfig:
    name: str = 'run'
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    physics: PhysicsConfig = field(default_factory=PhysicsConfig)
    plate: PlateConfig = field(default_factory=PlateConfig)
    initial: InitialConfig = field(default_factory=InitialConfig)
    run: RunConfig = field(default_factory=RunConfig)
    tolerances: ToleranceConfig = field(default_factory=ToleranceConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    debug: DebugConfig = field(default_factory=DebugConfig)

    def to_dict(self) -> Dict:
        data = asdict(self)
        data['output']['formats'] = list(self.output.formats)
        return data

    def config_hash(self) -> str:
        """sha256 of the canonical JSON form (output and debug sections excluded)"""
        data = self.to_dict()
        data.pop('output')
        data.pop('debug')
        return hashlib.sha256(json.dumps(data, sort_keys=True).encode('utf-8')).hexdigest()


def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)


def _is_int(value) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _section(raw: Dict, key: str, errors: List[str]) -> Dict:
    value = raw.get(key, {})
    if value is None:
        return {}
    if not isinstance(value, dict):
        errors.append(f"{key}: must be an object")
        return {}
    return value


def _unknown_keys(section: Dict, cls, prefix: str, errors: List[str]) -> None:
    allowed = set(cls.__dataclass_fields__)
    for key in sorted(set(section) - allowed):
        errors.append(f"{prefix}.{key}: unknown key")


def validate_config_dict(raw: Dict) -> List[str]:
    """Return every validation error of a raw configuration document"""
    errors = []
    if not isinstance(raw, dict):
        return ["config: top level must be a JSON object"]

    for key in sorted(set(raw) - set(SECTIONS)):
        errors.append(f"{key}: unknown section")
    if 'name' in raw and not isinstance(raw['name'], str):
        errors.append("name: must be a string")

    geometry = _section(raw, 'geometry', errors)
    _unknown_keys(geometry, GeometryConfig, 'geometry', errors)
    for key in ('Lx', 'Ly'):
        value = geometry.get(key, 1.0)
        if not _is_number(value) or value <= 0:
            errors.append(f"geometry.{key}: must be a positive number")
    for key, minimum in (('nx', MIN_PLATE_POINTS), ('ny', MIN_PLATE_POINTS), ('nz', MIN_FLUID_LAYERS)):
        value = geometry.get(key, minimum)
        if not _is_int(value) or value < minimum:
            errors.append(f"geometry.{key}: must be an integer >= {minimum}")

    physics = _section(raw, 'physics', errors)
    _unknown_keys(physics, PhysicsConfig, 'physics', errors)
    mu = physics.get('mu', 1.0)
    if not _is_number(mu) or mu < 0:
        errors.append("physics.mu: must be a non-negative number")

    plate = _section(raw, 'plate', errors)
    _unknown_keys(plate, PlateConfig, 'plate', errors)
    model = plate.get('model', 'kirchhoff')
    if model not in MODEL_KINDS:
        errors.append(f"plate.model: must be one of {', '.join(MODEL_KINDS)}, got {model!r}")
    if not isinstance(plate.get('params', {}), dict):
        errors.append("plate.params: must be an object")
    kappa = plate.get('kappa')
    if kappa is not None and (not _is_number(kappa) or not 0 < kappa < 0.5):
        errors.append("plate.kappa: must lie in (0, 1/2)")
    C_star = plate.get('C_star')
    if C_star is not None and (not _is_number(C_star) or C_star < 0):
        errors.append("plate.C_star: must be a non-negative number")
    gamma_prime = plate.get('gamma_prime')
    if gamma_prime is not None and not _is_number(gamma_prime):
        errors.append("plate.gamma_prime: must be a number")
    a = plate.get('a')
    if a is not None and (not _is_number(a) or not 0 < a <= 1):
        errors.append("plate.a: must lie in (0, 1]")
    eps = plate.get('eps')
    if eps is not None and (not _is_number(eps) or eps <= 0):
        errors.append("plate.eps: must be a positive number")
    alpha = plate.get('alpha', DEFAULT_ALPHA)
    if not _is_number(alpha) or not 0 < alpha < 2:
        errors.append("plate.alpha: must lie in (0, 2)")
    errors.extend(validate_profile(plate.get('h'), 'plate.h'))
    errors.extend(validate_profile(plate.get('F0'), 'plate.F0'))

    initial = _section(raw, 'initial', errors)
    _unknown_keys(initial, InitialConfig, 'initial', errors)
    errors.extend(validate_profile(initial.get('eta0'), 'initial.eta0'))
    errors.extend(validate_profile(initial.get('v0'), 'initial.v0'))

    run = _section(raw, 'run', errors)
    _unknown_keys(run, RunConfig, 'run', errors)
    T = run.get('T', 0.05)
    if not _is_number(T) or T <= 0:
        errors.append("run.T: must be a positive number")
    k = run.get('k', 4)
    if not _is_int(k) or k < 1:
        errors.append("run.k: must be an integer >= 1")
    elif _is_int(geometry.get('nx', 16)) and _is_int(geometry.get('ny', 16)):
        if k > geometry.get('nx', 16) * geometry.get('ny', 16):
            errors.append("run.k: cannot exceed nx*ny")
    N_user = run.get('N_user')
    if N_user is not None and (not _is_int(N_user) or N_user < 1):
        errors.append("run.N_user: must be an integer >= 1 or null")
    if not isinstance(run.get('strict', True), bool):
        errors.append("run.strict: must be true or false")
    if not run.get('strict', True) and N_user is None:
        errors.append("run.N_user: exploratory runs (strict=false) need N_user")
    j_floor = run.get('j_floor', DEFAULT_J_FLOOR)
    if not _is_number(j_floor) or not 0 <= j_floor < 1:
        errors.append("run.j_floor: must lie in [0, 1)")
    if not _is_int(run.get('seed', DEFAULT_SEED)):
        errors.append("run.seed: must be an integer")

    tolerances = _section(raw, 'tolerances', errors)
    _unknown_keys(tolerances, ToleranceConfig, 'tolerances', errors)
    for key in ToleranceConfig.__dataclass_fields__:
        value = tolerances.get(key, 1.0)
        if not _is_number(value) or value <= 0:
            errors.append(f"tolerances.{key}: must be a positive number")

    output = _section(raw, 'output', errors)
    _unknown_keys(output, OutputConfig, 'output', errors)
    formats = output.get('formats', ['csv', 'json'])
    if not isinstance(formats, list) or any(f not in OUTPUT_FORMATS for f in formats):
        errors.append(f"output.formats: must be a subset of {list(OUTPUT_FORMATS)}")
    for key in ('dir', 'basis_cache', 'database_url'):
        value = output.get(key)
        if value is not None and not isinstance(value, str):
            errors.append(f"output.{key}: must be a string")

    debug = _section(raw, 'debug', errors)
    _unknown_keys(debug, DebugConfig, 'debug', errors)
    for key in DebugConfig.__dataclass_fields__:
        if not isinstance(debug.get(key, False), bool):
            errors.append(f"debug.{key}: must be true or false")

    return errors


def config_from_dict(raw: Dict) -> SimConfig:
    """Validate and build a SimConfig; raises ConfigValidationError listing every offending key"""
    errors = validate_config_dict(raw)
    if errors:
        raise ConfigValidationError(errors)

    output = dict(raw.get('output') or {})
    if 'formats' in output:
        output['formats'] = tuple(output['formats'])
    return SimConfig(
        name=raw.get('name', 'run'),
        geometry=GeometryConfig(**(raw.get('geometry') or {})),
        physics=PhysicsConfig(**(raw.get('physics') or {})),
        plate=PlateConfig(**(raw.get('plate') or {})),
        initial=InitialConfig(**(raw.get('initial') or {})),
        run=RunConfig(**(raw.get('run') or {})),
        tolerances=ToleranceConfig(**(raw.get('tolerances') or {})),
        output=OutputConfig(**output),
        debug=DebugConfig(**(raw.get('debug') or {})),
    )


def load_config(path) -> SimConfig:
    """Read a JSON configuration file"""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding='utf-8'))
    except FileNotFoundError:
        raise ConfigValidationError([f"config: file not found: {path}"])
    except json.JSONDecodeError as e:
        raise ConfigValidationError([f"config: invalid JSON ({e})"])
    config = config_from_dict(raw)
    if config.name == 'run' and 'name' not in raw:
        config = replace(config, name=path.stem)
    return config
