"""
예외 계층과 종료 코드

CLI 종료 코드 규약: 0 통과, 1 검증 실패, 2 입력/가정 오류
"""
from __future__ import annotations

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_INPUT_ERROR = 2


class OrliczError(Exception):
    """패키지 공통 최상위 예외"""
    exit_code = EXIT_INPUT_ERROR


class InputError(OrliczError, ValueError):
    """잘못된 입력 (비유한 벡터, 범위 밖 파라미터, 누락된 seed 등)"""


class HypothesisError(OrliczError):
    """수학적 전제 조건 불만족"""


class NotNormalizableError(HypothesisError):
    def __init__(self, detail: str = ""):
        msg = "not normalizable by linearization"
        super().__init__(f"{msg}: {detail}" if detail else msg)


class NotNormalizedError(HypothesisError):
    pass


class NotIntegrableError(HypothesisError):
    pass


class DensityNegativeError(HypothesisError):
    def __init__(self, detail: str = ""):
        msg = "density formula negative: hypotheses of the generating theorem violated"
        super().__init__(f"{msg} ({detail})" if detail else msg)


class AtomsPresentError(HypothesisError):
    pass


class NotTwoConcaveError(HypothesisError):
    def __init__(self, detail: str = ""):
        msg = "not 2-concave: embedding hypothesis fails"
        super().__init__(f"{msg} ({detail})" if detail else msg)


class NumericalError(OrliczError):
    """수치 계산 실패"""


class DivergentIntegralError(NumericalError):
    pass


class LimitNotFoundError(NumericalError):
    def __init__(self, detail: str = ""):
        msg = "limit does not exist numerically"
        super().__init__(f"{msg}: {detail}" if detail else msg)


class QuadratureError(NumericalError):
    pass

