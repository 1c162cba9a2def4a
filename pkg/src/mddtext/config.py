"""Pipeline configuration file (JSON) and artifact hashing.

One config file drives every CLI stage. Relative paths are resolved against
the config file's own directory, so a config can travel with its corpus.
Stage manifests record content hashes of inputs and outputs; downstream
stages verify the hashes of what they consume.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .errors import ConfigError
from .rules import ApostrophePolicy, FontMetrics, RuleConfig, load_font_metrics

DEFAULT_PPL_BANDS = (15.0, 30.0)


def default_config_dict() -> dict:
    """Schema documentation by example; rule numbers are the standard
    reading-test defaults."""
    return {
        "corpus_dir": "corpus",
        "lexicon": {"lemmas": "lexicon.txt", "inflections": None},
        "ngram_order": 5,
        "rules": {
            "min_words": 9,
            "max_words": 15,
            "char_budget": 59,
            "n_lines": 3,
            "space_min_factor": "0.80",
            "space_max_factor": "1.25",
            "box_width": 200,
            "space_width": 10,
            "non_terminal_words": [],
            "apostrophe_policy": "keep",
        },
        "font_file": None,
        "scorer": {
            "kind": "markov",
            "endpoint": None,
            "command": None,
            "markov_order": 2,
            "markov_alpha": "0.1",
            "batch_size": 64,
        },
        "report": {"ppl_bands": list(DEFAULT_PPL_BANDS), "figures": True},
        "output_dir": "out",
        "jobs": 1,
        "limit": None,
        "seed": 0,
    }


@dataclass
class PipelineConfig:
    rules: RuleConfig
    fonts: FontMetrics
    ngram_order: int = 5
    corpus_dir: Path | None = None
    lemma_file: Path | None = None
    inflection_file: Path | None = None
    font_file: Path | None = None
    scorer_kind: str = "markov"
    external_endpoint: str | None = None
    scorer_command: list[str] | None = None
    markov_order: int = 2
    markov_alpha: Fraction = Fraction(1, 10)
    batch_size: int = 64
    ppl_bands: tuple[float, float] = DEFAULT_PPL_BANDS
    figures: bool = True
    output_dir: Path = Path("out")
    jobs: int = 1
    limit: int | None = None
    seed: int = 0
    raw: dict = field(default_factory=dict)

    def require(self, *attrs: str) -> None:
        """Fail early when a stage needs paths this config does not set."""
        for attr in attrs:
            value = getattr(self, attr)
            if value is None:
                raise ConfigError(f"config is missing {attr!r}")
            if isinstance(value, Path) and not value.exists():
                raise ConfigError(f"{attr} path does not exist: {value}")


def _fraction(value, name: str) -> Fraction:
    try:
        return Fraction(str(value))
    except (ValueError, ZeroDivisionError) as err:
        raise ConfigError(f"bad rational for {name}: {value!r}") from err


def _resolve(base: Path, value) -> Path | None:
    if value is None:
        return None
    path = Path(value)
    return path if path.is_absolute() else base / path


def parse_rule_config(data: dict) -> RuleConfig:
    known = {
        "min_words",
        "max_words",
        "char_budget",
        "n_lines",
        "space_min_factor",
        "space_max_factor",
        "box_width",
        "space_width",
        "forbidden_punct",
        "non_terminal_words",
        "apostrophe_policy",
    }
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown rule settings: {sorted(unknown)}")
    kwargs: dict = {}
    for key in ("min_words", "max_words", "char_budget", "n_lines", "box_width", "space_width"):
        if key in data:
            kwargs[key] = int(data[key])
    for key in ("space_min_factor", "space_max_factor"):
        if key in data:
            kwargs[key] = _fraction(data[key], key)
    if "forbidden_punct" in data:
        kwargs["forbidden_punct"] = frozenset(data["forbidden_punct"])
    if "non_terminal_words" in data:
        kwargs["non_terminal_words"] = frozenset(data["non_terminal_words"])
    if "apostrophe_policy" in data:
        try:
            kwargs["apostrophe_policy"] = ApostrophePolicy(data["apostrophe_policy"])
        except ValueError:
            raise ConfigError(
                f"apostrophe_policy must be one of "
                f"{[p.value for p in ApostrophePolicy]}"
            ) from None
    cfg = RuleConfig(**kwargs)
    cfg.check()
    return cfg


def load_pipeline_config(path) -> PipelineConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except ValueError as err:
        raise ConfigError(f"config is not valid JSON: {err}") from None
    base = path.parent

    rules = parse_rule_config(data.get("rules", {}))
    font_file = _resolve(base, data.get("font_file"))
    if font_file is not None:
        if not font_file.exists():
            raise ConfigError(f"font_file does not exist: {font_file}")
        fonts, overrides = load_font_metrics(font_file)
        if overrides:
            import dataclasses

            rules = dataclasses.replace(rules, **overrides)
            rules.check()
    else:
        fonts = FontMetrics.uniform(10)

    lexicon = data.get("lexicon") or {}
    scorer = data.get("scorer") or {}
    report = data.get("report") or {}
    kind = scorer.get("kind", "markov")
    if kind not in ("markov", "external", "subprocess"):
        raise ConfigError(f"unknown scorer kind {kind!r}")
    bands = report.get("ppl_bands", list(DEFAULT_PPL_BANDS))
    if len(bands) != 2 or not all(isinstance(b, (int, float)) for b in bands):
        raise ConfigError("report.ppl_bands must be two numbers")

    ngram_order = int(data.get("ngram_order", 5))
    if ngram_order < 2:
        raise ConfigError("ngram_order must be at least 2")

    return PipelineConfig(
        rules=rules,
        fonts=fonts,
        ngram_order=ngram_order,
        corpus_dir=_resolve(base, data.get("corpus_dir")),
        lemma_file=_resolve(base, lexicon.get("lemmas")),
        inflection_file=_resolve(base, lexicon.get("inflections")),
        font_file=font_file,
        scorer_kind=kind,
        external_endpoint=scorer.get("endpoint"),
        scorer_command=scorer.get("command"),
        markov_order=int(scorer.get("markov_order", 2)),
        markov_alpha=_fraction(scorer.get("markov_alpha", "0.1"), "markov_alpha"),
        batch_size=int(scorer.get("batch_size", 64)),
        ppl_bands=(float(bands[0]), float(bands[1])),
        figures=bool(report.get("figures", True)),
        output_dir=_resolve(base, data.get("output_dir", "out")),
        jobs=int(data.get("jobs", 1)),
        limit=data.get("limit"),
        seed=int(data.get("seed", 0)),
        raw=data,
    )


def config_hash(cfg: PipelineConfig) -> str:
    """Stable digest of the configuration content (not its file path)."""
    canonical = json.dumps(cfg.raw, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def file_sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def tree_sha256(directory) -> str:
    """Hash of a directory's files (names + contents), order-independent."""
    digest = hashlib.sha256()
    for path in sorted(Path(directory).rglob("*")):
        if path.is_file():
            digest.update(path.name.encode("utf-8"))
            digest.update(bytes.fromhex(file_sha256(path)))
    return digest.hexdigest()
