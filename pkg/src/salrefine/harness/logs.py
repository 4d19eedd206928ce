"""Line-oriented key=value logging."""

import logging
import sys


def _quote(v):
    s = str(v)
    if not s or any(c in s for c in ' ="'):
        return '"' + s.replace('"', '\\"') + '"'
    return s


def kv(**fields):
    return " ".join(f"{k}={_quote(v)}" for k, v in fields.items())


class KeyValueFormatter(logging.Formatter):
    def format(self, record):
        msg = record.getMessage()
        head = kv(level=record.levelname.lower(), logger=record.name)
        # messages already in key=value form are passed through
        if "=" in msg.split(" ", 1)[0]:
            return f"{head} {msg}"
        return f"{head} msg={_quote(msg)}"


def setup_logging(level=logging.INFO, stream=None):
    handler = logging.StreamHandler(stream or sys.stderr)
    handler.setFormatter(KeyValueFormatter())
    root = logging.getLogger("salrefine")
    root.handlers[:] = [handler]
    root.setLevel(level)
    root.propagate = False
    return root
