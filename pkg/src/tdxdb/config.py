"""Engine configuration: segment count, batching, external command templates."""

from __future__ import annotations

import shlex
import sys
from dataclasses import dataclass, field, replace
from typing import Optional

from .errors import ConfigError

DEFAULT_BATCH_SIZE = 256


def _default_commands() -> dict:
    # `python` scripts run under the reference shim if it is installed in
    # the same interpreter environment. `go` has no default: external mode
    # for compiled languages needs a precompiled executable configured here.
    return {"python": [sys.executable, "-m", "tdxshim", "{script}"]}


@dataclass
class Config:
    nseg: int = 2
    batch_size: int = DEFAULT_BATCH_SIZE
    external_commands: dict = field(default_factory=_default_commands)
    bsp_sync_timeout: float = 60.0
    transfer_connect_timeout: float = 10.0
    transfer_accept_timeout: float = 30.0
    transfer_port: int = 7171

    def __post_init__(self):
        if self.nseg < 1:
            raise ConfigError(f"nseg must be >= 1, got {self.nseg}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")

    def command_for(self, language: str) -> list[str]:
        try:
            return list(self.external_commands[language])
        except KeyError:
            raise ConfigError(
                f"no external command template configured for language {language!r}"
            ) from None

    def with_nseg(self, nseg: int) -> "Config":
        return replace(self, nseg=nseg)


def parse_config_text(text: str, base: Optional[Config] = None) -> Config:
    """Parse plain key=value lines; '#' starts a comment.

    Recognized keys: nseg, batch_size, bsp_sync_timeout, transfer_port,
    transfer_connect_timeout, transfer_accept_timeout, and
    external.<language> whose value is a command line (shell-style split,
    '{script}' placeholder for the script path).
    """
    cfg = base if base is not None else Config()
    commands = dict(cfg.external_commands)
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        try:
            if key == "nseg":
                values["nseg"] = int(value)
            elif key == "batch_size":
                values["batch_size"] = int(value)
            elif key == "bsp_sync_timeout":
                values["bsp_sync_timeout"] = float(value)
            elif key == "transfer_connect_timeout":
                values["transfer_connect_timeout"] = float(value)
            elif key == "transfer_accept_timeout":
                values["transfer_accept_timeout"] = float(value)
            elif key == "transfer_port":
                values["transfer_port"] = int(value)
            elif key.startswith("external."):
                commands[key[len("external.") :]] = shlex.split(value)
            else:
                raise ConfigError(f"config line {lineno}: unknown key {key!r}")
        except ValueError:
            raise ConfigError(f"config line {lineno}: bad value {value!r} for {key}") from None
    return replace(cfg, external_commands=commands, **values)


def load_config(path: str, base: Optional[Config] = None) -> Config:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return parse_config_text(fh.read(), base)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
