# config.py
SEED = 7
VERIFY_COUNT = 200
VERIFY_JOBS = 6
VERIFY_HORIZON = 30
WORKERS = 2
OUTPUT_DIR = "runs"
