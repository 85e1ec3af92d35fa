"""
Settings for the promptcal toolkit.

Values are read from the environment (optionally via a `.env` file in the project
root) and fall back to the protocol defaults. Anything that changes numerical
results is also recorded in report metadata, so a run can be reproduced from
the emitted bundle alone.
"""
import os
from pathlib import Path
from dotenv import load_dotenv

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

load_dotenv(os.path.join(BASE_DIR, '.env'))

VERSION = "0.3.0"

# Seed shared by the bootstrap and the locked random single-prompt baseline
DEFAULT_SEED = int(os.getenv("PROMPTCAL_SEED", "42"))

DEFAULT_BOOTSTRAP_B = int(os.getenv("PROMPTCAL_BOOTSTRAP_B", "10000"))

DEFAULT_OUT_DIR = Path(os.getenv("PROMPTCAL_OUT_DIR", "reports_out"))

LOG_LEVEL = os.getenv("PROMPTCAL_LOG_LEVEL", "INFO")

# Worker threads for bootstrap resampling. Results do not depend on it.
N_JOBS = int(os.getenv("PROMPTCAL_N_JOBS", "1"))

# Location of the shipped prompt template metadata
PROMPT_TEMPLATES_PATH = BASE_DIR / "scores" / "prompt_templates.json"
