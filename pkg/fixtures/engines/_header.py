import re
import sys
from pathlib import Path

import yaml

HEADER_RE = re.compile(r"/\*---\n(.*?)\n---\*/", re.DOTALL)


def expected_outputs(test_path: str) -> list:
    source = Path(test_path).read_text(encoding="utf-8")
    match = HEADER_RE.search(source)
    if not match:
        sys.exit("en-tête introuvable")
    return [str(item) for item in yaml.safe_load(match.group(1)).get("expected_outputs", [])]
