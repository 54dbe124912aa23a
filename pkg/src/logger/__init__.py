import logging
import os
from datetime import datetime

from dotenv import load_dotenv

load_dotenv()

LOG_DIR = os.getenv("GRAPHPROMPT_LOG_DIR", "logs")
os.makedirs(LOG_DIR, exist_ok=True)

log_filename = os.path.join(LOG_DIR, f"graphprompt_{datetime.now().strftime('%Y-%m-%d_%H-%M-%S')}.log")

# One file per process plus the console; library modules only add DEBUG detail.
logging.basicConfig(
    level=os.getenv("GRAPHPROMPT_LOG_LEVEL", "INFO").upper(),
    format="%(asctime)s - %(levelname)s - %(message)s",
    handlers=[
        logging.FileHandler(log_filename),
        logging.StreamHandler()
    ]
)

log = logging.getLogger("graphprompt")
