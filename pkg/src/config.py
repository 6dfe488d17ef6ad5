# src/config.py

import os
from os import getenv
from pathlib import Path
from dotenv import load_dotenv

load_dotenv()  # Reads the .env file

# --- Path Management ---
# Root directory
ROOT_DIR = Path(__file__).resolve().parent.parent
# Folders
DATA_DIR = ROOT_DIR / "data"
DESCRIPTOR_DIR = DATA_DIR / "descriptors"
OUTPUT_DIR = Path(getenv("FINSLER_OUTPUT_DIR", str(DATA_DIR / "output")))
SCAN_DIR = OUTPUT_DIR / "scans"
SWEEP_DIR = OUTPUT_DIR / "sweeps"
SPHERE_DIR = OUTPUT_DIR / "sphere"
DOCS_DIR = ROOT_DIR / "docs"
# Schema shipped with the CLI
SCHEMA_FILE = DOCS_DIR / "run-config.schema.json"

# --- Runtime Settings ---
SEED = int(getenv("FINSLER_SEED", "42"))
THREADS = int(getenv("FINSLER_THREADS", "0")) or os.cpu_count() or 1
LOG_LEVEL = getenv("FINSLER_LOG_LEVEL", "WARNING")
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

# --- Implicit Equation Solver ---
SOLVER_TOL = 1e-13
SOLVER_MAX_ITER = 100
ROOT_SCAN_POINTS = 1000
BRACKET_EXPANSIONS = 60
# Sublevel domains use phi(x) < 1 - DOMAIN_MARGIN
DOMAIN_MARGIN = 1e-12

# --- Finite Differences ---
FD_STEP_Y = 1e-5  # relative, first derivatives in y
FD_STEP_HESS = 3e-4  # relative, second derivatives of F^2 in y
FD_STEP_X = 1e-3  # absolute, first derivatives in x
FD_STEP_XX = 5e-3  # absolute, derivatives of the FD projective factor
EULER_TOL = 1e-6

# --- Convexity & Domain Scans ---
PD_EPS = 1e-9  # eps_pd = PD_EPS * trace(g) / n
SCAN_DIRECTIONS = 64
VERDICT_DIRECTIONS = 512
REGULARITY_SAMPLES = 256
COLLINEAR_TOL = 1e-9
FRONTIER_TOL = 1e-6
SCAN_CHUNK = 2048
# Cells whose lambda_min / (trace/n) falls below this pinch a region
PINCH_RATIO = 2e-3
MIN_COMPONENT_CELLS = 4

# --- Geometry ---
RK4_STEP = 1e-4
PROFILE_WINDOW = 0.1
PROFILE_DEGREE = 10
QUAD_EPSREL = 1e-10
QUAD_LIMIT = 200
K0_DEGENERACY = 1e-12
SEGMENT_CHECKS = 65
ESCAPE_SPEED = 1e8
BOUNDARY_FRACTIONS = (0.9, 0.99, 0.999, 0.9999)
BUSEMANN_STEPS = (1e-3, 1e-4, 1e-5)

# --- Sphere ---
EQUATOR_OFFSETS = (1e-3, 1e-4, 1e-5, 1e-6)
ANGLE_TOL = 1e-12

# --- Analysis ---
DUAL_SCAN_ANGLES = 720
DUAL_RESTARTS = 64
DUAL_XATOL = 1e-10
