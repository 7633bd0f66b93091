"""
studies/storage.py - 결과 파일 저장

출력 디렉터리 구성:
- summary.json : 판정 + 근거 + 단계별 보고서 + 전체 설정 (키 정렬)
- levels.csv   : 레벨별 표
- defects.csv  : 조밀 셀별 결함 표
- young.csv    : Young 측도 원자 표
- *.svg        : 선택 (output.plots)
"""

import json
import math
import os
from pathlib import Path
from typing import Optional, Union

import numpy as np
import pandas as pd

from studies.isentropic import LEVEL_COLUMNS
from studies.verdicts import PipelineResult, exit_code

DEFECT_COLUMNS = ["cell", "x_0", "R_e", "R_v_trace", "D_min_eig", "D_norm", "energy_defect"]
YOUNG_COLUMNS = ["cell", "atom", "weight"]
FLOAT_FORMAT = "%.12e"


def _jsonable(obj):
    """numpy/NaN 을 JSON 값으로 (NaN, inf 는 null / 문자열)"""
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isnan(v):
            return None
        if math.isinf(v):
            return "+inf" if v > 0 else "-inf"
        return v
    return obj


def _table(frame: Optional[pd.DataFrame], columns: list[str]) -> pd.DataFrame:
    if frame is None or frame.empty:
        return pd.DataFrame(columns=frame.columns if frame is not None and len(frame.columns) else columns)
    return frame


def _writable_dir(directory: Union[str, Path]) -> Path:
    path = Path(directory)
    path.mkdir(parents=True, exist_ok=True)
    if not os.access(path, os.W_OK):
        raise OSError(f"output directory not writable: {path}")
    return path


def write_summary(result: PipelineResult, path: Path) -> Path:
    cfg = result.config
    verdict = result.verdict
    summary = {
        "name": cfg.name,
        "branch": verdict.branch if verdict else None,
        "expect": cfg.expect,
        "exit_code": exit_code(verdict, cfg.expect),
        "evidence": verdict.evidence if verdict else {},
        "reasons": verdict.reasons if verdict else [],
        "reports": result.reports,
        "config": cfg.model_dump(mode="json"),
    }
    with open(path, "w") as f:
        json.dump(_jsonable(summary), f, sort_keys=True, indent=2)
        f.write("\n")
    return path


def write_plots(result: PipelineResult, directory: Path) -> list[Path]:
    """잔차-레벨, 에너지-시간, 결함 지도 (SVG, 날짜 메타데이터 없음)"""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "eulerdefect"
    meta = {"Date": None}
    out = []

    levels = result.levels
    if not levels.empty:
        fig, ax = plt.subplots(figsize=(5, 4))
        for col in ("e1_sup", "e2_sup"):
            ax.semilogy(levels["level"], levels[col].clip(lower=1e-300), marker="o", label=col)
        ax.set_xlabel("level")
        ax.set_ylabel("sup |residual|")
        ax.legend()
        path = directory / "residuals.svg"
        fig.savefig(path, format="svg", metadata=meta)
        plt.close(fig)
        out.append(path)

    if result.energy_histories:
        fig, ax = plt.subplots(figsize=(5, 4))
        for level, (times, energy) in sorted(result.energy_histories.items()):
            ax.plot(times, energy, label=f"level {level}")
        ax.set_xlabel("t")
        ax.set_ylabel("energy")
        ax.legend()
        path = directory / "energy.svg"
        fig.savefig(path, format="svg", metadata=meta)
        plt.close(fig)
        out.append(path)

    if result.defect_map is not None:
        dmap = np.asarray(result.defect_map, dtype=float)
        fig, ax = plt.subplots(figsize=(5, 4))
        if dmap.ndim == 1:
            ax.plot(dmap, drawstyle="steps-mid")
            ax.set_xlabel("coarse cell")
        else:
            im = ax.imshow(dmap.T, origin="lower")
            fig.colorbar(im, ax=ax)
        path = directory / "defect_map.svg"
        fig.savefig(path, format="svg", metadata=meta)
        plt.close(fig)
        out.append(path)
    return out


def emit_report(result: PipelineResult, directory: Optional[Union[str, Path]] = None,
                plots: Optional[bool] = None) -> dict[str, Path]:
    """요약/표/그림 저장, 같은 설정이면 표는 바이트 단위로 동일"""
    cfg = result.config
    out_dir = _writable_dir(directory or cfg.output.directory)
    plots = cfg.output.plots if plots is None else plots

    paths = {"summary": write_summary(result, out_dir / "summary.json")}
    tables = {
        "levels": (result.levels, LEVEL_COLUMNS),
        "defects": (result.defects, DEFECT_COLUMNS),
        "young": (result.young, YOUNG_COLUMNS),
    }
    for name, (frame, columns) in tables.items():
        path = out_dir / f"{name}.csv"
        _table(frame, columns).to_csv(path, index=False, float_format=FLOAT_FORMAT)
        paths[name] = path
    if plots:
        for path in write_plots(result, out_dir):
            paths[path.stem] = path

    print(f"  {out_dir}: {len(paths)}개 파일 저장 완료")
    return paths
