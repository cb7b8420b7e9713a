import hashlib

from .. import __version__


def input_digest(*texts: str) -> str:
    """sha256 over the given input texts, in order."""
    digest = hashlib.sha256()
    for text in texts:
        digest.update(text.encode("utf-8"))
        digest.update(b"\0")
    return digest.hexdigest()


class RunRecord:
    def __init__(self, command: str, digest: str, options: dict, results: dict,
                 trace: list = None, timings: dict = None, version: str = __version__):
        self.command = command
        self.digest = digest
        self.options = dict(options)
        self.results = dict(results)
        self.trace = list(trace or [])
        self.timings = dict(timings or {})
        self.version = version

    # Records of identical runs compare equal once timings are left out
    def to_dict(self, include_timings: bool = True) -> dict:
        data = {
            "command": self.command,
            "input_digest": self.digest,
            "version": self.version,
            "options": self.options,
            "results": self.results,
            "trace": self.trace,
        }
        if include_timings:
            data["timings"] = self.timings
        return data

    @staticmethod
    def from_dict(data: dict) -> "RunRecord":
        return RunRecord(
            command=data.get("command", ""),
            digest=data.get("input_digest", ""),
            options=data.get("options", {}),
            results=data.get("results", {}),
            trace=data.get("trace", []),
            timings=data.get("timings", {}),
            version=data.get("version", __version__),
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, RunRecord):
            return NotImplemented
        return self.to_dict(include_timings=False) == other.to_dict(include_timings=False)

    def __repr__(self) -> str:
        return f"RunRecord({self.command}, {self.digest[:12]})"
