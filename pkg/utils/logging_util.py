from datetime import datetime
from pathlib import Path
from typing import Optional


def append_log(log_path: Path, message: str, source: Optional[str] = None) -> None:
    """Append ``message`` to the log file, one timestamped entry per line.

    ``source`` tags each entry with the subcommand that produced it.
    """
    log_path.parent.mkdir(parents=True, exist_ok=True)
    timestamp = datetime.now().strftime("%Y-%m-%d %H:%M:%S")
    tag = f" [{source}]" if source else ""
    lines = message.splitlines() or [""]
    with log_path.open("a", encoding="utf-8") as handle:
        for line in lines:
            handle.write(f"[{timestamp}]{tag} {line}\n")
