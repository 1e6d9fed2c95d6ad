"""Regenerate the bundled scenario files in src/occur/scenarios/."""

import json
import math
from pathlib import Path

import numpy as np

from occur.scenario import encode_matrix

OUT = Path(__file__).resolve().parents[1] / "src" / "occur" / "scenarios"

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.diag([1.0, -1.0]).astype(complex)
EXCITED = np.diag([1.0, 0.0])  # +1/2 eigenvector of H_S = sz/2
GROUND = np.diag([0.0, 1.0])
_PSI = np.array([math.cos(math.pi / 8), math.sin(math.pi / 8)])
TILTED = np.outer(_PSI, _PSI)  # cos(pi/8)|e> + sin(pi/8)|g>

OMEGA01 = 1.0
RATE = 0.2
OMEGA_C = 10.0
# gamma(omega01) = 2 pi eta omega01 e^{-omega01/omega_c} at T = 0
ETA = RATE / (2 * math.pi * OMEGA01 * math.exp(-OMEGA01 / OMEGA_C))
G_OBS = SX + 0.3 * SZ


def twolevel(variant, **extra):
    doc = {
        "name": f"twolevel_{variant}",
        "system": {"dimS": 2, "H_S": encode_matrix(0.5 * OMEGA01 * SZ), "couplings": [encode_matrix(G_OBS)]},
        "bath": {"temperature": 0.0, "eta": ETA, "omega_c": OMEGA_C, "lamb_shift_mode": "zero"},
        "generator": {"variant": variant},
        "observables": [{"name": "G", "G": encode_matrix(G_OBS)}],
        "initial_state": {"rho_S0": encode_matrix(EXCITED)},
        "integrator": {"dt": 0.01, "t_final": 50 / RATE, "store_every": 1},
        "audit": {"integral_threshold": 1e-4},
    }
    doc.update(extra)
    return doc


def driven(variant):
    doc = twolevel(variant)
    doc["name"] = variant
    doc["drive"] = {
        "protocol": "linear_sweep",
        "parameters": {"H_start": encode_matrix(0.5 * SZ), "H_end": encode_matrix(0.5 * (SZ + 0.6 * SX)), "t_sweep": 40.0},
        "dt_drive": 0.01,
    }
    doc["integrator"] = {"dt": 0.01, "t_final": 40.0, "store_every": 1}
    return doc


def qubit_qubit(name, g, observables):
    return {
        "name": name,
        "system": {"dimS": 2, "H_S": encode_matrix(0.5 * SZ), "couplings": [encode_matrix(g * SX)]},
        "environment": {
            "dimE": 2,
            "H_E": encode_matrix(1.5 * SZ),
            "bath_ops": [encode_matrix(SX)],
            "rho_E0": encode_matrix(GROUND),
        },
        "bath": {"temperature": 0.0, "eta": 0.01, "omega_c": OMEGA_C, "lamb_shift_mode": "zero"},
        "generator": {"variant": "redfield_nonsecular"},
        "observables": [{"name": n, "G": encode_matrix(m)} for n, m in observables],
        "initial_state": {"rho_S0": encode_matrix(TILTED)},
        "integrator": {"dt": 0.01, "t_final": 5.0, "store_every": 1},
    }


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    docs = [
        twolevel("secular_weak", name="twolevel_secular"),
        twolevel("redfield_nonsecular", name="twolevel_redfield"),
        twolevel(
            "singular_coupling",
            name="twolevel_singular",
            generator={"variant": "singular_coupling", "rates": {"gamma": RATE, "S": 0.05}},
        ),
        driven("driven_secular"),
        driven("driven_nonsecular"),
        qubit_qubit("qubit_qubit_exact", 0.1, [("sx", SX), ("sy", SY), ("sz", SZ), ("A", SX)]),
        qubit_qubit("qubit_qubit_sweep", 1.0, [("sz", SZ)]),
    ]
    for doc in docs:
        path = OUT / f"{doc['name']}.json"
        path.write_text(json.dumps(doc, indent=1) + "\n")
        print(path)


if __name__ == "__main__":
    main()
