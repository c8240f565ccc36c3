"""Write the experiment-config JSON schema to docs/config.schema.json."""
import json
from pathlib import Path

from bds_sim.config import SCHEMA

out = Path(__file__).resolve().parent.parent / "docs" / "config.schema.json"
out.parent.mkdir(exist_ok=True)
out.write_text(json.dumps(SCHEMA, indent=2) + "\n")
print(out)
