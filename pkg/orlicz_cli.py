import argparse, json, sys, logging

from pydantic import ValidationError

from src.errors import EXIT_INPUT_ERROR, OrliczError
from src.pipeline import build_config, load_config_file, run
from src.tables import dumps

COMMANDS = ["norm", "make-dist", "make-orlicz", "conditions", "verify", "roundtrip", "embed"]


def setup_logging(level: str = "INFO"):
    """로깅 설정"""
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format="%(asctime)s | %(levelname)s | %(name)s | %(message)s"
    )


def _csv(cast):
    def parse(text: str):
        return [cast(t) for t in text.split(",") if t.strip()]
    return parse


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(description="Orlicz 함수 / 분포 대응 계산기")
    ap.add_argument("command", nargs="?", choices=COMMANDS, help="실행할 명령 (설정 파일에 있으면 생략 가능)")
    ap.add_argument("--config", help="실행 설정 JSON (플래그가 덮어씀)")
    ap.add_argument("--orlicz", help="Orlicz 함수: 단축형 (power:2, linearized:1.7, pareto-p:2,1.5 ...) 또는 JSON 경로")
    ap.add_argument("--general-n", help="일반 Orlicz 노름 N (단축형 또는 JSON 경로)")
    ap.add_argument("--distribution", help="분포: 단축형 (pareto:1.5, uniform, constant:1, orlicz:linearized:1.7@2) 또는 JSON 경로")
    ap.add_argument("--vector", type=_csv(float), help="쉼표로 구분한 벡터 (norm)")
    ap.add_argument("-p", dest="p", help="p (1 < p ≤ inf, 'inf' 허용)")
    ap.add_argument("-q", dest="q", type=float, help="q")
    ap.add_argument("--map", choices=["max", "pnorm", "qpower", "general-n"], help="make-orlicz 대응 종류")
    ap.add_argument("--theorem", help="verify 대상 항등식 id")
    ap.add_argument("--n-list", type=_csv(int), help="차원 목록 (예: 10,100,1000)")
    ap.add_argument("--replicates", type=int, help="Monte Carlo 반복 수")
    ap.add_argument("--seed", type=int, help="난수 seed (verify/embed/표본 생성 시 필수)")
    ap.add_argument("--aggregation", choices=["auto", "mean", "median-of-means"], help="Monte Carlo 집계 방식")
    ap.add_argument("--workers", type=int, help="스레드 수 (결과에는 영향 없음)")
    ap.add_argument("--matrices-per-n", type=int, help="embed: n 별 행렬 수")
    ap.add_argument("--spread-bound", type=float, help="비율 spread / 왜곡 안정성 상한")
    ap.add_argument("--samples", type=int, help="make-dist: 저장할 표본 수")
    ap.add_argument("--strict", action="store_true", default=None, help="꺾임점을 M⁻¹(1) 에 두는 엄격 정규화")
    ap.add_argument("--out", dest="out_dir", help="산출물 디렉터리")
    ap.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING"], help="로그 레벨")
    return ap


def overrides_from_args(args: argparse.Namespace) -> dict:
    mc = {
        "replicates": args.replicates,
        "seed": args.seed,
        "aggregation": args.aggregation,
        "workers": args.workers,
    }
    return {
        "command": args.command,
        "orlicz": args.orlicz,
        "general_n": args.general_n,
        "distribution": args.distribution,
        "vector": args.vector,
        "p": args.p,
        "q": args.q,
        "map": args.map,
        "theorem": args.theorem,
        "n_list": args.n_list,
        "matrices_per_n": args.matrices_per_n,
        "spread_bound": args.spread_bound,
        "samples": args.samples,
        "strict": args.strict,
        "out_dir": args.out_dir,
        "mc": {k: v for k, v in mc.items() if v is not None},
    }


def main(argv=None):
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)

    try:
        base = load_config_file(args.config) if args.config else {}
        config = build_config(base, overrides_from_args(args))
        res = run(config)
    except (OrliczError, ValidationError, FileNotFoundError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return getattr(e, "exit_code", EXIT_INPUT_ERROR)

    if config.command == "norm":
        print(f"{res.summary['norm']:.12g}")
    else:
        print(dumps(res.summary), end="")
    print(f"✅ 결과 저장: {config.out_dir}", file=sys.stderr)
    return res.exit_code


if __name__ == "__main__":
    sys.exit(main() or 0)
