"""
studies/ - 검증 실험 오케스트레이션 패키지

사용법:
    uv run python -m studies.runner dichotomy --config configs/viscous_riemann.yaml [--out DIR] [--expect strong|defect]
    uv run python -m studies.runner generate|verify|defect|liouville|jensen|report --config PATH
"""
