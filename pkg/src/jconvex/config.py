"""Scenario configuration: JSON validated by pydantic models."""
from __future__ import annotations

import json
from pathlib import Path
from typing import Annotated, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ConfigInvalid


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class Term(_Model):
    """One monomial ``c z^alpha zbar^beta``."""

    z: List[Annotated[int, Field(ge=0)]]
    zbar: List[Annotated[int, Field(ge=0)]]
    re: float = 0.0
    im: float = 0.0

    @model_validator(mode="after")
    def _same_length(self):
        if len(self.z) != len(self.zbar):
            raise ValueError("z and zbar exponent lists must have equal length")
        return self


class QEntry(_Model):
    i: Annotated[int, Field(ge=0)]
    j: Annotated[int, Field(ge=0)]
    terms: List[Term]


class StructureConfig(_Model):
    kind: Literal["standard", "terms", "random", "zbar_linear"] = "standard"
    radius: Annotated[float, Field(gt=0)] = 1.0
    entries: List[QEntry] = []
    # random
    bound: Annotated[float, Field(ge=0, lt=1)] = 0.05
    degree: Annotated[int, Field(ge=0, le=6)] = 2
    min_degree: Annotated[int, Field(ge=0)] = 1
    factor: List[Term] = []
    seed_offset: int = 0
    # zbar_linear: Q_ij = coeff * zbar_k
    i: Annotated[int, Field(ge=0)] = 0
    j: Annotated[int, Field(ge=0)] = 1
    k: Annotated[int, Field(ge=0)] = 0
    coeff: float = 0.05

    @model_validator(mode="after")
    def _kind_fields(self):
        if self.kind == "terms" and not self.entries:
            raise ValueError("kind 'terms' needs entries")
        if self.kind == "random" and self.min_degree > self.degree:
            raise ValueError("min_degree exceeds degree")
        if self.kind == "zbar_linear" and not abs(self.coeff) < 1:
            raise ValueError("coeff must satisfy |coeff| < 1")
        return self


class DomainConfig(_Model):
    kind: Literal["ball", "egg", "shell", "poly"] = "ball"
    m: Annotated[int, Field(ge=1, le=4)] = 2  # egg exponent: |z1|^2 + |z2|^(2m) < 1
    terms: List[Term] = []
    chart_radius: Optional[Annotated[float, Field(gt=0)]] = None  # preset value if unset
    bound: Optional[Annotated[float, Field(gt=0)]] = None
    collar_depth: Optional[Annotated[float, Field(gt=0)]] = None

    @model_validator(mode="after")
    def _kind_fields(self):
        if self.kind == "poly" and not self.terms:
            raise ValueError("kind 'poly' needs terms")
        return self


class PsiConfig(_Model):
    kind: Literal["norm_squared", "poly"] = "norm_squared"
    terms: List[Term] = []


def _eta(v: float) -> float:
    if not 0 < v < 1:
        raise ValueError("eta must lie in (0, 1)")
    return v


class _Task(_Model):
    name: Optional[str] = None


class DiscTask(_Task):
    task: Literal["disc"]
    p: List[List[float]]  # [[re, im], ...]
    v: List[List[float]]
    n_r: Annotated[int, Field(ge=4)] = 32
    n_theta: Annotated[int, Field(ge=8)] = 64
    degree: Annotated[int, Field(ge=2, le=40)] = 16
    tol: Annotated[float, Field(gt=0)] = 1e-8
    dump_nodes: bool = True


class LeviTask(_Task):
    task: Literal["levi"]
    f: PsiConfig = PsiConfig()
    n_samples: Annotated[int, Field(ge=1)] = 10
    point_radius: Annotated[float, Field(gt=0, lt=1)] = 0.5
    tol: Annotated[float, Field(gt=0)] = 1e-4


class PshScanTask(_Task):
    task: Literal["psh_scan"]
    u: PsiConfig = PsiConfig()
    n_points: Annotated[int, Field(ge=1)] = 200
    radius: Annotated[float, Field(gt=0)] = 0.9
    margin: Annotated[float, Field(ge=0)] = 1e-6
    expect: Optional[Literal["strictly-psh", "psh", "not-psh"]] = None


class NormalizeTask(_Task):
    task: Literal["normalize"]
    direction: List[float] = [1.0, 0.0, 0.0, 0.0]
    tol: Annotated[float, Field(gt=0)] = 1e-4


class DFSearchTask(_Task):
    task: Literal["df_search"]
    n_samples: Annotated[int, Field(ge=1)] = 200
    n_boundary: Annotated[int, Field(ge=1)] = 200
    margin: Annotated[float, Field(ge=0)] = 1e-6
    A_ladder: List[Annotated[float, Field(gt=0)]] = [2.0**k for k in range(11)]
    eta_ladder: List[float] = [2.0**-k for k in range(1, 9)]
    recheck_samples: Annotated[int, Field(ge=0)] = 200
    expect_failure: bool = False

    _check_eta = field_validator("eta_ladder")(lambda cls, v: [_eta(x) for x in v])


class SymplecticTask(_Task):
    task: Literal["symplectic"]
    source: Literal["certificate", "psi"] = "certificate"
    n_points: Annotated[int, Field(ge=1)] = 20


class HartogsTask(_Task):
    task: Literal["hartogs"]
    family: Literal["shell", "translate"] = "translate"
    n_t: Annotated[int, Field(ge=2)] = 11
    expect_figure: bool = False


class ContactTask(_Task):
    task: Literal["contact"]
    deltas: List[Annotated[float, Field(gt=0, lt=1)]] = [1e-1, 1e-2, 1e-3, 1e-4]
    n_boundary: Annotated[int, Field(ge=1)] = 24
    A: Optional[Annotated[float, Field(gt=0)]] = None
    eta: Optional[float] = None
    k: Literal[0, 1] = 1
    target: Annotated[float, Field(gt=0)] = 1e-3

    _check_eta = field_validator("eta")(lambda cls, v: v if v is None else _eta(v))


Task = Annotated[
    Union[DiscTask, LeviTask, PshScanTask, NormalizeTask, DFSearchTask, SymplecticTask,
          HartogsTask, ContactTask],
    Field(discriminator="task"),
]


class Scenario(_Model):
    name: Annotated[str, Field(min_length=1, pattern=r"^[A-Za-z0-9_.-]+$")]
    n: Annotated[int, Field(ge=1, le=4)] = 2
    seed: int = 0
    structure: StructureConfig = StructureConfig()
    domain: DomainConfig = DomainConfig()
    psi: PsiConfig = PsiConfig()
    tasks: List[Task] = []

    @model_validator(mode="after")
    def _dimensions(self):
        n = self.n
        for e in self.structure.entries:
            if e.i >= n or e.j >= n:
                raise ValueError(f"structure entry ({e.i}, {e.j}) outside an {n}x{n} matrix")
        if self.structure.kind == "zbar_linear" and max(self.structure.i, self.structure.j,
                                                        self.structure.k) >= n:
            raise ValueError("zbar_linear indices exceed the dimension")
        for t in _all_terms(self):
            if len(t.z) != n:
                raise ValueError(f"term exponents must have length n = {n}")
        if self.domain.kind == "egg" and n != 2:
            raise ValueError("the egg domain is defined for n = 2")
        for t in self.tasks:
            if isinstance(t, DiscTask) and (len(t.p) != n or len(t.v) != n):
                raise ValueError("disc p and v need n complex entries")
            if isinstance(t, NormalizeTask) and len(t.direction) != 2 * n:
                raise ValueError("normalize direction needs 2n real entries")
        names = [t.name for t in self.tasks if t.name]
        if len(names) != len(set(names)):
            raise ValueError("task names must be unique")
        return self

    def task_names(self) -> List[str]:
        return [t.name or f"{i:02d}-{t.task}" for i, t in enumerate(self.tasks)]


def _all_terms(s: Scenario):
    for e in s.structure.entries:
        yield from e.terms
    yield from s.structure.factor
    yield from s.domain.terms
    yield from s.psi.terms
    for t in s.tasks:
        for attr in ("f", "u"):
            sub = getattr(t, attr, None)
            if sub is not None:
                yield from sub.terms


def _format_errors(err: ValidationError) -> List[str]:
    out = []
    for e in err.errors():
        loc = ".".join(str(x) for x in e["loc"])
        out.append(f"{loc}: {e['msg']}")
    return out


def parse_scenario(data) -> Scenario:
    try:
        return Scenario.model_validate(data)
    except ValidationError as err:
        fields = _format_errors(err)
        raise ConfigInvalid("invalid scenario:\n  " + "\n  ".join(fields), fields) from None


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigInvalid(f"cannot read {path}: {exc}", ["<file>"]) from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}", ["<json>"]) from None
    return parse_scenario(data)


def json_schema() -> dict:
    return Scenario.model_json_schema()
