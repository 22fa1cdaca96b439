"""
Named scalar profiles on the plate grid (loads h, F0 and initial data)
"""
from typing import Dict, Optional

import numpy as np

from src.exceptions import ParameterError

PROFILE_TYPES = ('zero', 'constant', 'sine_bump', 'quartic_bump', 'mode')


def validate_profile(profile: Optional[Dict], key: str) -> list:
    """Return a list of error strings for a profile object (empty when valid)"""
    errors = []
    if profile is None:
        return errors
    if not isinstance(profile, dict):
        return [f"{key}: expected an object like {{\"type\": \"sine_bump\", \"amplitude\": 0.01}}"]
    kind = profile.get('type', 'zero')
    if kind not in PROFILE_TYPES:
        errors.append(f"{key}.type: must be one of {', '.join(PROFILE_TYPES)}, got {kind!r}")
    amplitude = profile.get('amplitude', profile.get('value', 0.0))
    if not isinstance(amplitude, (int, float)) or isinstance(amplitude, bool) or not np.isfinite(amplitude):
        errors.append(f"{key}.amplitude: must be a finite number")
    if kind == 'mode':
        index = profile.get('index')
        if not isinstance(index, int) or isinstance(index, bool) or index < 1:
            errors.append(f"{key}.index: mode profiles need an integer index >= 1")
    return errors


def sample_profile(profile: Optional[Dict], grid, basis=None) -> np.ndarray:
    """
    Sample a named profile on the interior plate nodes

    Args:
        profile: {"type": ..., "amplitude": ...}; None means zero
        grid: PlateGrid
        basis: GalerkinBasis, needed only for "mode" profiles

    Returns:
        Flat grid vector of length nx*ny
    """
    if not profile:
        return np.zeros(grid.size)
    kind = profile.get('type', 'zero')
    amplitude = float(profile.get('amplitude', profile.get('value', 0.0)))
    X, Y = grid.coordinates()

    if kind == 'zero':
        values = np.zeros(grid.shape)
    elif kind == 'constant':
        values = np.full(grid.shape, amplitude)
    elif kind == 'sine_bump':
        values = amplitude * np.sin(np.pi * X / grid.Lx) * np.sin(np.pi * Y / grid.Ly)
    elif kind == 'quartic_bump':
        # vanishes with its normal derivative on the boundary, peak value = amplitude
        bump = (X * (grid.Lx - X)) ** 2 * (Y * (grid.Ly - Y)) ** 2
        values = amplitude * bump * 256.0 / (grid.Lx**4 * grid.Ly**4)
    elif kind == 'mode':
        if basis is None:
            raise ParameterError("mode profiles need a basis")
        index = int(profile['index'])
        if index > basis.k_max:
            raise ParameterError(f"mode index {index} exceeds k={basis.k_max}")
        return amplitude * np.array(basis.W[:, index - 1])
    else:
        raise ParameterError(f"unknown profile type {kind!r}")
    return values.ravel()
