"""Set-based retrograde endgame databases for Bridge double-dummy play."""

__all__ = ["config", "core", "errors", "report", "retro", "rules", "sets", "setdb", "setro"]
