import argparse
import logging
import math
import platform
import sys

log = logging.getLogger("env_check")

def setup_logging():
    logging.basicConfig(
        level=logging.INFO,
        format="%(asctime)s | %(levelname)s | %(name)s | %(message)s"
    )

def log_sysinfo():
    log.info("Python: %s", sys.version.split()[0])
    log.info("Platform: %s", platform.platform())
    log.info("Machine: %s", platform.machine())
    log.info("Executable: %s", sys.executable)

def try_import(name, attr="__version__"):
    try:
        mod = __import__(name)
        ver = getattr(mod, attr, "unknown")
        log.info("OK import %-20s version=%s", name, ver)
        return mod
    except Exception as e:
        log.error("FAIL import %s: %s", name, e)
        return None

def smoke_norm():
    """‖(3,4)‖ under t² 는 5"""
    from src.orlicz import luxemburg_norm, power
    value = luxemburg_norm(power(2.0), [3.0, 4.0])
    ok = abs(value - 5.0) <= 1e-10
    log.info("norm smoke: ||(3,4)||_t^2 = %.12g (%s)", value, "OK" if ok else "FAIL")
    return ok

def smoke_quantile():
    """pareto_q(2) 의 0.75 분위수는 2"""
    from src.distributions import pareto_q
    value = float(pareto_q(2.0).quantile(0.75))
    ok = math.isclose(value, 2.0, rel_tol=1e-10)
    log.info("quantile smoke: pareto_q(2) at 0.75 = %.12g (%s)", value, "OK" if ok else "FAIL")
    return ok

def smoke_roundtrip(r: float = 1.7, p: float = 2.0):
    """M → 밀도 → M_{X,p} 왕복 (느릴 수 있음)"""
    from src.correspondence import roundtrip_M_to_M
    from src.orlicz import linearized_power
    rep = roundtrip_M_to_M(linearized_power(r), p)
    log.info("roundtrip smoke: t^%g, p=%g, max rel dev=%.3g (%s)",
             r, p, rep.max_rel_dev, "OK" if rep.passed else "FAIL")
    return rep.passed

def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--roundtrip", action="store_true", help="왕복 스모크 테스트도 실행")
    args = ap.parse_args()

    setup_logging()
    log_sysinfo()

    # 핵심 라이브러리 체크
    log.info("=== Core Libraries ===")
    mods = [try_import(name) for name in ("numpy", "scipy", "pandas", "pydantic")]
    try_import("pytest")
    if not all(mods):
        log.error("필수 라이브러리 누락")
        sys.exit(2)

    log.info("=== Smoke Tests ===")
    ok = smoke_norm() and smoke_quantile()
    if args.roundtrip:
        ok = smoke_roundtrip() and ok

    log.info("=== Environment Check Complete ===")
    if not ok:
        sys.exit(1)

if __name__ == "__main__":
    main()
