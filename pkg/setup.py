#!/usr/bin/env python3
"""
Setup script for the plate/fluid splitting simulator

Checks the interpreter, creates .env and the output/log directories, validates
every shipped configuration and builds the Galerkin basis of each plate grid.
"""
import shutil
import sys
from pathlib import Path
from typing import Dict, List, Tuple

ROOT = Path(__file__).resolve().parent
CONFIG_DIR = ROOT / 'configs'
MIN_PYTHON = (3, 9)

sys.path.insert(0, str(ROOT))


def check_python_version() -> bool:
    if sys.version_info < MIN_PYTHON:
        print(f"❌ Python {MIN_PYTHON[0]}.{MIN_PYTHON[1]} or higher is required (found {sys.version.split()[0]})")
        return False
    print(f"✅ Python version: {sys.version.split()[0]}")
    return True


def setup_environment(root: Path = ROOT) -> bool:
    """Create .env from env_example.txt unless one exists"""
    env_file, env_example = root / '.env', root / 'env_example.txt'
    if env_file.exists():
        print(f"✅ Environment file already exists: {env_file.name}")
        return True
    if not env_example.exists():
        print(f"❌ {env_example.name} not found")
        return False
    shutil.copy(env_example, env_file)
    print(f"✅ Created {env_file.name}; edit it to change the output directory, log level or run registry URL")
    return True


def create_directories(root: Path = ROOT) -> List[Path]:
    from src.config import LOG_DIR, OUTPUT_DIR

    created = []
    for directory in (LOG_DIR, OUTPUT_DIR):
        path = root / directory
        if not path.exists():
            path.mkdir(parents=True)
            created.append(path)
            print(f"✅ Created directory: {path}")
    return created


def validate_configs(config_dir: Path = CONFIG_DIR) -> Tuple[Dict[str, object], Dict[str, List[str]]]:
    """Load every JSON document in config_dir; returns (configs by file name, validation errors by file name)"""
    from src.exceptions import ConfigValidationError
    from src.sim_config import load_config

    configs, errors = {}, {}
    for path in sorted(Path(config_dir).glob('*.json')):
        try:
            configs[path.name] = load_config(path)
            print(f"✅ {path.name}")
        except ConfigValidationError as e:
            errors[path.name] = list(e.errors)
            print(f"❌ {path.name}: {'; '.join(e.errors)}")
    return configs, errors


def check_bases(configs: Dict[str, object]) -> Dict[Tuple, float]:
    """Build the basis of every distinct (grid, k) once; returns the largest eigenvalue xi_k of each"""
    from src.plate_spectral_basis import PlateGrid, build_basis

    xi_max = {}
    for config in configs.values():
        g = config.geometry
        key = (g.Lx, g.Ly, g.nx, g.ny, config.run.k)
        if key in xi_max:
            continue
        basis = build_basis(PlateGrid(g.Lx, g.Ly, g.nx, g.ny), config.run.k, cache_path=_cache_path(config))
        xi_max[key] = float(basis.xi[-1])
        print(f"✅ basis {g.nx}x{g.ny}, k={config.run.k}: xi_k = {xi_max[key]:.6g}")
    return xi_max


def _cache_path(config):
    return Path(config.output.basis_cache) if config.output.basis_cache else None


def main():
    print("🚀 Plate/Fluid Splitting Simulator Setup")
    print("=" * 40)

    if not check_python_version():
        sys.exit(1)
    if not setup_environment():
        sys.exit(1)
    create_directories()

    print("\n🔍 Validating configs/ ...")
    configs, errors = validate_configs()
    if errors:
        sys.exit(1)
    print("\n🔍 Building plate bases ...")
    check_bases(configs)

    print("\n🎉 Setup completed successfully!")
    print("\n📋 Next steps:")
    print("1. Check the installation: python test_installation.py")
    print("2. Print the plate eigenvalues: python main.py eigs configs/kirchhoff.json")
    print("3. Run the verification suites: python main.py verify configs/kirchhoff.json")
    print("4. Run a simulation: python main.py run configs/kirchhoff.json")


if __name__ == "__main__":
    main()
