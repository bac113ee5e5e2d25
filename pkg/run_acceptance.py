import os
import subprocess
import sys
import time

# (label, CLI arguments, expected exit code)
ACCEPTANCE_RUNS = [
    ("sphere r=0.5",        ["curvature", "--example", "sphere", "--r", "0.5", "--points", "25"], 0),
    ("sphere r=1",          ["curvature", "--example", "sphere", "--r", "1", "--points", "25"], 0),
    ("sphere r=2",          ["curvature", "--example", "sphere", "--r", "2", "--points", "25"], 0),
    ("hyperbolic plane",    ["curvature", "--example", "hyperbolic_plane", "--points", "25"], 0),
    ("flat torus",          ["curvature", "--example", "flat_torus", "--n", "2"], 0),
    ("gaussian line q=1",   ["curvature", "--example", "gaussian_line", "--q", "1", "--point", "0"], 0),
    ("hopf eps=1 oneill",   ["verify", "--example", "hopf", "--eps", "1", "--identity", "oneill"], 0),
    ("hopf eps=0.5 all",    ["verify", "--example", "hopf", "--eps", "0.5", "--identity", "all"], 0),
    ("product oneill",      ["verify", "--example", "product", "--identity", "oneill"], 0),
    ("warped all",          ["verify", "--example", "warped_circle", "--identity", "all"], 0),
    ("weighted warped all", ["verify", "--example", "warped_circle", "--a", "0.3", "--identity", "all"], 0),
    ("heisenberg all",      ["verify", "--example", "heisenberg", "--identity", "all"], 0),
    ("violating measure",   ["verify", "--example", "violating", "--identity", "measure-hypothesis"], 0),
    ("violating all",       ["verify", "--example", "violating", "--identity", "all"], 2),
    ("berger sweep",        ["sweep", "--family", "berger_family", "--values", "1,0.5,0.25,0.1"], 0),
    ("product sweep",       ["sweep", "--family", "product_family"], 0),
    ("warped sweep",        ["sweep", "--family", "warped_family", "--values", "0,0.5"], 0),
]

PAUSE_SECONDS = float(os.getenv("SUBCURV_BATCH_PAUSE", "0"))


def _stamp():
    return time.strftime('%Y-%m-%d %H:%M:%S')


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) < 2:
        print("Usage: python run_acceptance.py <start_index> <end_index>")
        return 1

    start_idx = int(argv[0])
    end_idx = int(argv[1])
    batch = ACCEPTANCE_RUNS[start_idx:end_idx]

    if not batch:
        print(f"No acceptance runs found in range {start_idx} to {end_idx}.")
        return 0

    mismatches = 0
    for i, (label, args, expected) in enumerate(batch):
        global_idx = start_idx + i

        print("=" * 60)
        print(f"[{_stamp()}] Running {label} (Run {global_idx + 1} of {len(ACCEPTANCE_RUNS)})")
        print("=" * 60)

        # same interpreter, so the installed package and .env are shared
        result = subprocess.run([sys.executable, "-m", "submersion_curvature", *args])
        if result.returncode == expected:
            print(f"[{_stamp()}] OK {label}: exit {result.returncode}")
        else:
            mismatches += 1
            print(f"[{_stamp()}] MISMATCH {label}: exit {result.returncode}, expected {expected}")
            # continue with the next run even if one fails

        if PAUSE_SECONDS and global_idx < len(ACCEPTANCE_RUNS) - 1:
            time.sleep(PAUSE_SECONDS)

    print(f"[{_stamp()}] {len(batch) - mismatches} of {len(batch)} runs matched")
    return 1 if mismatches else 0


if __name__ == "__main__":
    sys.exit(main())
