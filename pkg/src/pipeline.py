"""
실행 파이프라인: 설정(RunConfig) → 계산 → out_dir 산출물

명령: norm, make-dist, make-orlicz, conditions, verify, roundtrip, embed
종료 코드: 0 통과, 1 검증 실패 (입력/가정 오류는 예외로 올라가 CLI 가 2 로 바꾼다)
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .conditions import check_integral_condition, check_limits, check_pointwise_condition, integral_condition_curve
from .correspondence import (
    check_qpower_bound,
    closed_form_qpower,
    density_from_MXp,
    orlicz_from_general_N,
    orlicz_from_max,
    orlicz_from_p_norm,
    orlicz_from_q_power,
    qpower_identity,
    roundtrip_M_to_M,
)
from .distributions import (
    Distribution,
    constant,
    density_from_orlicz,
    distribution_from_orlicz_max,
    distribution_from_spec,
    pareto_q,
    uniform,
)
from .embedding import distortion_sweep
from .errors import EXIT_CHECK_FAILED, EXIT_OK, InputError, LimitNotFoundError
from .montecarlo import RatioCase, ratio_stability, substream
from .orlicz import (
    OrliczFunction,
    default_grid,
    hinge,
    linearized_power,
    luxemburg_norm,
    pareto_p_orlicz,
    piecewise_power,
    power,
    young_power,
)
from .schemas import DistributionSpec, OrliczSpec, RunConfig
from .tables import (
    curve_frame,
    distortion_frame,
    ensure_out,
    orlicz_grid_frame,
    ratio_frame,
    sample_frame,
    survival_frame,
    write_csv,
    write_json,
)

log = logging.getLogger("pipeline")

_STREAM_SAMPLES = 301
_STREAM_TENSOR = 302


@dataclass
class RunResult:
    exit_code: int
    summary: dict[str, Any]
    artifacts: dict[str, str] = field(default_factory=dict)


# ---------------------------------------------------------------- 설정

def _merge(base: dict, extra: dict) -> dict:
    out = dict(base)
    for k, v in extra.items():
        if v is None:
            continue
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def build_config(base: dict | None = None, overrides: dict | None = None) -> RunConfig:
    """JSON 설정 파일 내용에 CLI 플래그(값이 None 이 아닌 것)를 덮어쓴 뒤 검증"""
    return RunConfig.model_validate(_merge(base or {}, overrides or {}))


def load_config_file(path: str | Path) -> dict:
    with open(path, encoding="utf-8") as f:
        return json.load(f)


# ---------------------------------------------------------------- 입력 해석

def _floats(text: str) -> list[float]:
    return [math.inf if t.strip().lower() == "inf" else float(t) for t in text.split(",") if t.strip()]


def _load_json_input(text: str) -> dict | None:
    p = Path(text)
    if p.suffix.lower() == ".json" or p.is_file():
        with open(p, encoding="utf-8") as f:
            return json.load(f)
    return None


def resolve_orlicz(spec: str | OrliczSpec | dict, strict: bool = False, name: str = "M") -> OrliczFunction:
    """
    Orlicz 함수 입력 해석

    문자열 단축형:
        power:r[,coef]  young:r  linearized:r  hinge[:t]
        pareto-p:p,q    piecewise:b1,b2/e1,e2,e3
    그 외 문자열은 OrliczSpec JSON 파일 경로로 본다.
    """
    if isinstance(spec, (OrliczSpec, dict)):
        return OrliczFunction.from_spec(spec, name=name)
    loaded = _load_json_input(spec)
    if loaded is not None:
        return OrliczFunction.from_spec(loaded, name=name)
    head, _, arg = spec.partition(":")
    head = head.strip().lower()
    try:
        if head == "power":
            vals = _floats(arg)
            return power(vals[0], vals[1] if len(vals) > 1 else 1.0)
        if head == "young":
            return young_power(_floats(arg)[0])
        if head == "linearized":
            return linearized_power(_floats(arg)[0], strict=strict)
        if head == "hinge":
            return hinge(_floats(arg)[0] if arg else 1.0)
        if head == "pareto-p":
            p, q = _floats(arg)
            return pareto_p_orlicz(p, q)
        if head == "piecewise":
            breaks, _, exps = arg.partition("/")
            return piecewise_power(_floats(breaks), _floats(exps))
    except (IndexError, ValueError) as e:
        if isinstance(e, InputError):
            raise
        raise InputError(f"cannot parse Orlicz shorthand {spec!r}: {e}") from e
    raise InputError(f"unknown Orlicz function {spec!r}")


def resolve_distribution(spec: str | DistributionSpec | dict, strict: bool = False) -> Distribution:
    """
    분포 입력 해석

    문자열 단축형:
        pareto:q  uniform[:lo,hi]  constant[:v]
        orlicz:<Orlicz 단축형>[@p]   (p 생략 또는 inf 면 최댓값 분포)
    그 외 문자열은 DistributionSpec JSON 파일 경로로 본다.
    from_orlicz 계열 JSON 은 params.orlicz 에 단축형 문자열을 쓸 수 있다.
    """
    if isinstance(spec, str):
        loaded = _load_json_input(spec)
        if loaded is None:
            return _distribution_shorthand(spec, strict)
        spec = loaded
    if isinstance(spec, dict):
        spec = DistributionSpec.model_validate(spec)
    if spec.kind in ("from_orlicz", "from_orlicz_max") and isinstance(spec.params.get("orlicz"), str):
        M = resolve_orlicz(spec.params["orlicz"], strict=strict)
        p = _floats(str(spec.params.get("p", "inf")))[0]
        if spec.kind == "from_orlicz_max" or math.isinf(p):
            return distribution_from_orlicz_max(M)
        return density_from_orlicz(M, p)
    return distribution_from_spec(spec)


def _distribution_shorthand(spec: str, strict: bool) -> Distribution:
    head, _, arg = spec.partition(":")
    head = head.strip().lower()
    try:
        if head == "pareto":
            return pareto_q(_floats(arg)[0])
        if head == "uniform":
            vals = _floats(arg)
            return uniform(*vals) if vals else uniform()
        if head == "constant":
            return constant(_floats(arg)[0] if arg else 1.0)
        if head == "orlicz":
            inner, _, p_text = arg.rpartition("@") if "@" in arg else (arg, "", "inf")
            M = resolve_orlicz(inner, strict=strict)
            p = _floats(p_text)[0]
            return distribution_from_orlicz_max(M) if math.isinf(p) else density_from_orlicz(M, p)
    except (IndexError, ValueError) as e:
        if isinstance(e, InputError):
            raise
        raise InputError(f"cannot parse distribution shorthand {spec!r}: {e}") from e
    raise InputError(f"unknown distribution {spec!r}")


def _need(value, what: str, command: str):
    if value is None:
        raise InputError(f"'{command}' needs {what}")
    return value


def _support_grid(d: Distribution, points: int) -> np.ndarray:
    lo = d.lo
    hi = d.hi if math.isfinite(d.hi) else float(d.quantile(1.0 - 1e-6))
    if not hi > lo:
        hi = 2.0 * lo if lo > 0 else 1.0
    if lo > 0:
        return np.geomspace(lo, hi, points)
    return np.linspace(0.0, hi, points)


# ---------------------------------------------------------------- 명령

def _cmd_norm(cfg: RunConfig, out: Path) -> RunResult:
    M = resolve_orlicz(_need(cfg.orlicz, "an Orlicz function", cfg.command), cfg.strict)
    x = _need(cfg.vector, "a vector", cfg.command)
    value = luxemburg_norm(M, x, cfg.tolerances)
    log.info(f"Luxemburg 노름 ({M.name}): {value:.12g}")
    summary = {"orlicz": M.name, "norm": value, "dimension": len(x)}
    return RunResult(EXIT_OK, summary, {"summary": write_json(summary, out / "norm.json")})


def _cmd_make_dist(cfg: RunConfig, out: Path) -> RunResult:
    M = resolve_orlicz(_need(cfg.orlicz, "an Orlicz function", cfg.command), cfg.strict)
    p = math.inf if cfg.p is None else cfg.p
    tol = cfg.tolerances

    # 1. M → 분포
    d = distribution_from_orlicz_max(M, tol) if math.isinf(p) else density_from_orlicz(M, p, tol)
    log.info(f"분포 생성: {M.name}, p={p:g}, 원자 {len(d.atoms)}개")

    # 2. 산출물
    arts = {
        "distribution": write_json(d.to_spec(), out / "distribution.json"),
        "survival": write_csv(survival_frame(d, _support_grid(d, cfg.grid_points)), out / "survival.csv"),
    }
    if cfg.samples > 0:
        xs = d.sample(cfg.samples, cfg.mc.seed, (_STREAM_SAMPLES,))
        arts["samples"] = write_csv(sample_frame(xs), out / "samples.csv")
        log.info(f"표본 {cfg.samples}개 저장 (seed={cfg.mc.seed})")
    summary = {
        "orlicz": M.name,
        "p": p,
        "total_mass": d.total_mass(),
        "atoms": [list(a) for a in d.atoms],
        "support": [d.lo, d.hi],
        "tail_index": d.tail_index,
    }
    arts["summary"] = write_json(summary, out / "summary.json")
    return RunResult(EXIT_OK, summary, arts)


def _cmd_make_orlicz(cfg: RunConfig, out: Path) -> RunResult:
    d = resolve_distribution(_need(cfg.distribution, "a distribution", cfg.command), cfg.strict)
    tol = cfg.tolerances

    # 1. 분포 → Orlicz 함수
    if cfg.map == "max":
        M = orlicz_from_max(d, tol)
    elif cfg.map == "pnorm":
        M = orlicz_from_p_norm(d, _need(cfg.p, "p", cfg.command), tol)
    elif cfg.map == "qpower":
        M = orlicz_from_q_power(d, _need(cfg.p, "p", cfg.command), _need(cfg.q, "q", cfg.command), tol)
    else:
        N = resolve_orlicz(_need(cfg.general_n, "an Orlicz function N", cfg.command), cfg.strict, name="N")
        M = orlicz_from_general_N(d, N, tol)
    log.info(f"Orlicz 함수 생성 ({cfg.map}): {M!r}")

    # 2. 산출물
    u1 = M.unit_level
    grid = np.geomspace(u1 * 1e-3, u1 * 1e3, cfg.grid_points)
    summary = {
        "map": cfg.map,
        "distribution": d.kind,
        "name": M.name,
        "unit_level": u1,
        "kink": M.kink,
        "linear_tail": M.linear_tail,
        "normalized": M.normalized,
    }
    arts = {
        "orlicz": write_json(M.to_spec(), out / "orlicz.json"),
        "grid": write_csv(orlicz_grid_frame(M, grid), out / "orlicz_grid.csv"),
        "summary": write_json(summary, out / "summary.json"),
    }
    return RunResult(EXIT_OK, summary, arts)


def _cmd_conditions(cfg: RunConfig, out: Path) -> RunResult:
    M = resolve_orlicz(_need(cfg.orlicz, "an Orlicz function", cfg.command), cfg.strict)
    q = _need(cfg.q, "q", cfg.command)
    tol = cfg.tolerances
    grid = default_grid(M, tol)

    integral = check_integral_condition(M, q, grid, tol)
    pointwise = check_pointwise_condition(M, q, grid, tol=tol)
    try:
        limits: dict[str, Any] = dict(zip(("M", "dM", "d2M"), check_limits(M, q, tol)))
    except LimitNotFoundError as e:
        log.warning(f"극한 추정 실패: {e}")
        limits = {"diagnostic": str(e)}

    reports = {"integral": integral, "pointwise": pointwise, "limits": limits}
    arts: dict[str, str] = {}
    bound_ok = True
    if integral.passed:
        curve = integral_condition_curve(M, q, grid)
        arts["integral_curve"] = write_csv(curve_frame(grid, curve, "C"), out / "integral_curve.csv")
        # 적분 조건이 성립할 때만 q-거듭제곱 닫힌 형태가 수렴한다
        bound = check_qpower_bound(closed_form_qpower(M, q, tol), M, grid)
        reports["qpower_bound"] = bound
        bound_ok = bound.passed
    arts["conditions"] = write_json(reports, out / "conditions.json")
    passed = integral.passed and pointwise.passed and bound_ok
    summary = {"orlicz": M.name, "q": q, "C": integral.constants["C"],
               "gamma": pointwise.constants["gamma"], "passed": passed}
    if "qpower_bound" in reports:
        summary["qpower_coefficient"] = reports["qpower_bound"].constants["coefficient"]
    return RunResult(EXIT_OK if passed else EXIT_CHECK_FAILED, summary, arts)


def build_ratio_cases(cfg: RunConfig) -> list[RatioCase]:
    """verify 용 표준 사례: 벡터는 (1,…,1), 행렬은 seed 로 만든 표준정규 행렬"""
    theorem = _need(cfg.theorem, "a theorem id", cfg.command)
    d = resolve_distribution(cfg.distribution, cfg.strict) if cfg.distribution is not None else None
    M = resolve_orlicz(cfg.orlicz, cfg.strict) if cfg.orlicz is not None else None
    N = resolve_orlicz(cfg.general_n, cfg.strict, name="N") if cfg.general_n is not None else None
    p = math.inf if cfg.p is None else cfg.p

    needs = {
        "max": ("distribution",),
        "pnorm": ("distribution", "p"),
        "lq-generation": ("p", "q"),
        "tensor": ("orlicz", "p", "q"),
        "max-inverse": ("orlicz",),
        "pnorm-inverse": ("orlicz", "p"),
        "tensor-x": ("distribution", "p", "q"),
        "general-n": ("distribution", "general_n"),
    }[theorem]
    for key in needs:
        _need(getattr(cfg, key), key.replace("_", " "), f"verify {theorem}")

    cases = []
    for n in cfg.n_list:
        if theorem in ("tensor", "tensor-x"):
            weights = substream(cfg.mc.seed, (_STREAM_TENSOR, n)).standard_normal((n, n))
        else:
            weights = np.ones(n)
        cases.append(RatioCase(weights=weights, d=d, M=M, N=N, p=p, q=cfg.q, label=f"{theorem}/n={n}"))
    return cases


def _cmd_verify(cfg: RunConfig, out: Path) -> RunResult:
    cases = build_ratio_cases(cfg)
    report = ratio_stability(cfg.theorem, cases, cfg.mc, bound=cfg.spread_bound)
    arts = {
        "ratios": write_csv(ratio_frame(report), out / "ratios.csv"),
        "report": write_json(report, out / "ratio_report.json"),
    }
    summary = {"theorem": cfg.theorem, "spread": report.spread, "bound": cfg.spread_bound, "passed": report.passed}
    return RunResult(EXIT_OK if report.passed else EXIT_CHECK_FAILED, summary, arts)


def _cmd_roundtrip(cfg: RunConfig, out: Path) -> RunResult:
    M = resolve_orlicz(_need(cfg.orlicz, "an Orlicz function", cfg.command), cfg.strict)
    p = math.inf if cfg.p is None else cfg.p
    tol = cfg.tolerances

    # 1. M → 밀도 → M_{X,p}
    reports: dict[str, Any] = {"roundtrip": roundtrip_M_to_M(M, p, tol=tol)}

    # 2. 밀도 복원 (분포가 주어졌을 때)
    if cfg.distribution is not None:
        d = resolve_distribution(cfg.distribution, cfg.strict)
        reports["density"] = density_from_MXp(d, _need(cfg.p, "p", cfg.command), tol=tol)

    # 3. q 거듭제곱 항등식 (q 가 주어졌을 때)
    if cfg.q is not None:
        reports["qpower"] = qpower_identity(M, p, cfg.q, tol=tol)

    passed = all(r.passed for r in reports.values())
    arts = {"roundtrip": write_json(reports, out / "roundtrip.json")}
    summary = {name: r.passed for name, r in reports.items()}
    summary["passed"] = passed
    log.info(f"왕복 검증 ({M.name}, p={p:g}): {summary}")
    return RunResult(EXIT_OK if passed else EXIT_CHECK_FAILED, summary, arts)


def _cmd_embed(cfg: RunConfig, out: Path) -> RunResult:
    M = resolve_orlicz(_need(cfg.orlicz, "an Orlicz function", cfg.command), cfg.strict)
    q = _need(cfg.q, "q", cfg.command)
    report = distortion_sweep(M, q, cfg.n_list, cfg.matrices_per_n, cfg.mc, bound=cfg.spread_bound)
    arts = {
        "distortion": write_csv(distortion_frame(report), out / "distortion.csv"),
        "report": write_json(report, out / "distortion_report.json"),
    }
    summary = {"orlicz": M.name, "q": q, "stability": report.stability, "passed": report.passed}
    return RunResult(EXIT_OK if report.passed else EXIT_CHECK_FAILED, summary, arts)


_COMMANDS = {
    "norm": _cmd_norm,
    "make-dist": _cmd_make_dist,
    "make-orlicz": _cmd_make_orlicz,
    "conditions": _cmd_conditions,
    "verify": _cmd_verify,
    "roundtrip": _cmd_roundtrip,
    "embed": _cmd_embed,
}


def run(config: RunConfig) -> RunResult:
    """
    설정 하나를 실행하고 out_dir 에 산출물을 쓴다.

    Args:
        config: 검증된 실행 설정

    Returns:
        종료 코드, 요약, 산출물 경로

    Raises:
        OrliczError: 입력 또는 수학적 전제 조건 오류
    """
    log.info(f"실행 시작: {config.command}")
    out = ensure_out(config.out_dir)

    # 1. 설정 기록 (다시 읽으면 같은 실행이 재현된다)
    config_path = write_json(config.model_dump(mode="json"), out / "config.json")

    # 2. 명령 실행
    result = _COMMANDS[config.command](config, out)
    result.artifacts["config"] = config_path

    log.info(f"실행 종료: {config.command}, exit={result.exit_code}, 산출물 {len(result.artifacts)}개")
    return result
