"""Synthetic HDFS-style log corpus with tunable cross-line redundancy."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from ..symstring import seeded_rng

# Field slots: {date} {time} {pid} {blk} {ip} {ip2} {port} {size} {n}
TEMPLATES = (
    "{date} {time} {pid} INFO dfs.DataNode$PacketResponder: PacketResponder {n} for block {blk} terminating",
    "{date} {time} {pid} INFO dfs.DataNode$PacketResponder: Received block {blk} of size {size} from /{ip}",
    "{date} {time} {pid} INFO dfs.FSNamesystem: BLOCK* NameSystem.addStoredBlock: blockMap updated: {ip}:50010 is added to {blk} size {size}",
    "{date} {time} {pid} INFO dfs.DataNode$DataXceiver: Receiving block {blk} src: /{ip}:{port} dest: /{ip2}:50010",
    "{date} {time} {pid} INFO dfs.FSNamesystem: BLOCK* NameSystem.allocateBlock: /mnt/hadoop/mapred/system/job_200811092030_0001/job.jar. {blk}",
    "{date} {time} {pid} INFO dfs.DataBlockScanner: Verification succeeded for {blk}",
    "{date} {time} {pid} WARN dfs.DataNode$DataXceiver: {ip}:50010:Got exception while serving {blk} to /{ip2}:",
    "{date} {time} {pid} INFO dfs.DataNode$DataXceiver: {ip}:50010 Served block {blk} to /{ip2}",
    "{date} {time} {pid} INFO dfs.FSDataset: Deleting block {blk} file /mnt/hadoop/dfs/data/current/subdir{n}/{blk}",
    "{date} {time} {pid} INFO dfs.FSNamesystem: BLOCK* NameSystem.delete: {blk} is added to invalidSet of {ip}:50010",
    "{date} {time} {pid} INFO dfs.DataNode: {ip}:50010 Starting thread to transfer block {blk} to {ip2}:50010",
    "{date} {time} {pid} INFO dfs.DataNode$BlockReceiver: Exception in receiveBlock for block {blk} java.io.IOException: Connection reset by peer",
)

COMPONENTS = ("DataNode", "FSNamesystem", "FSDataset", "DataBlockScanner", "NameNode", "JobTracker")

# Template defaults used when a field is not mutated.
DEFAULTS = {
    "date": "081109",
    "time": "203615",
    "pid": "148",
    "blk": "blk_38865049064139660",
    "ip": "10.251.42.84",
    "ip2": "10.251.90.64",
    "port": "54106",
    "size": "67108864",
    "n": "1",
}


@dataclass(frozen=True)
class SyntheticCorpusSpec:
    """Parameters of the synthetic log generator.

    Each ``*_rate`` is the per-line probability that the field is redrawn at
    random instead of keeping the template default; rate 0 emits every line
    verbatim from its template. ``record_width`` pads (or truncates) each
    line to a fixed number of bytes including the newline; 0 keeps natural
    line lengths.
    """

    n_lines: int = 10_000
    template_pool: int = 8
    timestamp_rate: float = 0.3
    block_rate: float = 0.3
    host_rate: float = 0.3
    record_width: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.n_lines < 0:
            raise ValueError("n_lines must be non-negative")
        if self.template_pool < 1:
            raise ValueError("template_pool must be >= 1")
        for name in ("timestamp_rate", "block_rate", "host_rate"):
            rate = getattr(self, name)
            if not 0.0 <= rate <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {rate}")
        if self.record_width < 0:
            raise ValueError("record_width must be non-negative")


def _template_pool(size: int) -> list:
    pool = list(TEMPLATES[:size])
    extra = 0
    while len(pool) < size:
        # Derive extra templates by renaming the component of a builtin one.
        src = TEMPLATES[extra % len(TEMPLATES)]
        comp = COMPONENTS[(extra // len(TEMPLATES)) % len(COMPONENTS)]
        pool.append(src.replace("dfs.", f"dfs.{comp}{extra}.", 1))
        extra += 1
    return pool


def synthesize_corpus(spec: SyntheticCorpusSpec) -> bytes:
    """Generate ``spec.n_lines`` log lines; deterministic under ``spec.seed``."""
    rng = seeded_rng(spec.seed)
    pool = _template_pool(spec.template_pool)
    # Zipf-like template popularity, as in real logs.
    weights = [1.0 / (i + 1) for i in range(len(pool))]
    total = sum(weights)
    weights = [w / total for w in weights]

    n = spec.n_lines
    picks = rng.choice(len(pool), size=n, p=weights)
    u = rng.random((n, 3))
    lines = []
    for row in range(n):
        fields = dict(DEFAULTS)
        if u[row, 0] < spec.timestamp_rate:
            fields["date"] = f"0811{int(rng.integers(9, 12)):02d}"
            fields["time"] = f"{int(rng.integers(0, 24)):02d}{int(rng.integers(0, 60)):02d}{int(rng.integers(0, 60)):02d}"
            fields["pid"] = str(int(rng.integers(1, 400)))
        if u[row, 1] < spec.block_rate:
            sign = "-" if rng.random() < 0.5 else ""
            fields["blk"] = f"blk_{sign}{int(rng.integers(10**17, 10**19 - 1, dtype='uint64'))}"
            fields["size"] = str(int(rng.integers(1, 67108865)))
            fields["n"] = str(int(rng.integers(0, 3)))
        if u[row, 2] < spec.host_rate:
            fields["ip"] = f"10.25{int(rng.integers(0, 2))}.{int(rng.integers(0, 256))}.{int(rng.integers(0, 256))}"
            fields["ip2"] = f"10.25{int(rng.integers(0, 2))}.{int(rng.integers(0, 256))}.{int(rng.integers(0, 256))}"
            fields["port"] = str(int(rng.integers(1024, 65536)))
        line = pool[picks[row]].format(**fields)
        if spec.record_width:
            line = line[: spec.record_width - 1].ljust(spec.record_width - 1)
        lines.append(line + "\n")
    return "".join(lines).encode("ascii")


def synthesize_to_size(target_bytes: int, **spec_kwargs) -> bytes:
    """Generate at least ``target_bytes`` of corpus (line count estimated, then topped up)."""
    probe = synthesize_corpus(SyntheticCorpusSpec(n_lines=200, **spec_kwargs))
    per_line = max(1, len(probe) // 200)
    n_lines = target_bytes // per_line + 1
    while True:
        data = synthesize_corpus(SyntheticCorpusSpec(n_lines=n_lines, **spec_kwargs))
        if len(data) >= target_bytes:
            return data
        n_lines = int(n_lines * 1.1) + 1


def read_corpus_dir(path) -> dict:
    """Read every regular file under ``path`` as raw bytes, keyed by relative name."""
    root = Path(path)
    if root.is_file():
        return {root.name: root.read_bytes()}
    files = {}
    for p in sorted(root.rglob("*")):
        if p.is_file():
            files[p.relative_to(root).as_posix()] = p.read_bytes()
    return files
