"""Known-good reaction-diffusion guest: Strang splitting with the exact
logistic reaction update and an explicit periodic diffusion step.

Reads the harness manifest named by argv[1], writes the solution tensor to
manifest["output_path"].
"""

import json
import struct
import sys

import numpy as np


def read_tensor(path):
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:4] != b"PDET" or raw[4] != 1 or raw[5] != 0:
        raise ValueError("unsupported tensor file: %s" % path)
    ndim = raw[6]
    dims = struct.unpack_from("<%dQ" % ndim, raw, 7)
    data = np.frombuffer(raw, dtype="<f8", offset=7 + 8 * ndim)
    return data.reshape(dims).copy()


def write_tensor(path, arr):
    arr = np.ascontiguousarray(arr, dtype="<f8")
    header = b"PDET" + bytes([1, 0, arr.ndim]) + struct.pack("<%dQ" % arr.ndim, *arr.shape)
    with open(path, "wb") as f:
        f.write(header + arr.tobytes())


def reaction_half_step(u, dt, rho, eps=1e-10):
    # exact logistic update in the overflow-stable form
    return 1.0 / (1.0 + np.exp(-rho * dt) * (1.0 - u) / (u + eps))


def solver(u0_batch, t_coordinate, nu, rho):
    batch, n = u0_batch.shape
    dx = 1.0 / n  # periodic unit interval
    dt_max = 0.25 * dx * dx / nu
    print(f"Stability-based dt_max = {dt_max:.2e}")

    T = len(t_coordinate) - 1
    out = np.empty((batch, T + 1, n))
    u = u0_batch.astype(np.float64, copy=True)
    out[:, 0] = u
    total_internal_steps = 0
    for i in range(1, T + 1):
        span = t_coordinate[i] - t_coordinate[i - 1]
        n_internal = max(int(np.ceil(span / dt_max - 1e-12)), 1)
        if i == 1:
            print(f"Using {n_internal} internal time steps")
        dt = span / n_internal
        lam = nu * dt / (dx * dx)
        for _ in range(n_internal):
            u = reaction_half_step(u, 0.5 * dt, rho)
            u = u + lam * (np.roll(u, 1, axis=1) - 2.0 * u + np.roll(u, -1, axis=1))
            u = reaction_half_step(u, 0.5 * dt, rho)
        total_internal_steps += n_internal
        out[:, i] = u
        print(f"Time step {i}/{T} completed (internal steps: {total_internal_steps})")
    return out


def main():
    with open(sys.argv[1]) as f:
        manifest = json.load(f)
    u0 = read_tensor(manifest["input_paths"]["u0"])
    t = np.asarray(manifest["t_coordinates"], dtype=np.float64)
    params = manifest["params"]
    solution = solver(u0, t, params["nu"], params["rho"])
    write_tensor(manifest["output_path"], solution)


if __name__ == "__main__":
    main()
