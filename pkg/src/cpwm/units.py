"""Unit conventions: Hartree atomic units throughout (hbar = 1)."""

CM1_PER_HARTREE = 219474.6305
HBAR = 1.0


def cm1_to_hartree(value):
    return value / CM1_PER_HARTREE


def hartree_to_cm1(value):
    return value * CM1_PER_HARTREE


def to_hartree(value, unit):
    """Convert an energy given in ``unit`` ("cm-1" or "hartree") to hartree."""
    unit = unit.lower().replace("^", "").replace("⁻¹", "-1")
    if unit in ("cm-1", "cm1", "wavenumber"):
        return cm1_to_hartree(value)
    if unit in ("hartree", "au", "a.u.", "eh"):
        return float(value)
    raise ValueError(f"unknown energy unit {unit!r}")
