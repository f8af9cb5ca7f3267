"""
Brute-force reference implementations for the tests.

Nothing here imports from the package: each oracle is a direct, slow
transcription used to cross-check the vectorized production code.
"""

from typing import Dict, List, Sequence, Set, Tuple

ORDER = ["B02", "B08", "B03", "B10", "B04", "B05", "B11", "B06", "B07", "B8A", "B12", "B01", "B09"]
RESOLUTION = {"B01": 60, "B02": 10, "B03": 10, "B04": 10, "B05": 20, "B06": 20, "B07": 20,
              "B08": 10, "B8A": 20, "B09": 60, "B10": 60, "B11": 20, "B12": 20}


def oracle_hotmap_pixel(r8: float, r11: float, r12: float, surrounded: bool) -> bool:
    """Thermal-anomaly rule for one pixel; ``surrounded`` is SUR(alpha or beta) there"""
    alpha = False
    if r11 != 0 and r8 != 0:
        alpha = (r12 / r11 >= 1.4) and (r12 / r8 >= 1.2) and (r12 >= 0.15)
    beta = False
    if r8 != 0:
        beta = (r11 / r8 >= 2.0) and (r11 >= 0.5) and (r12 >= 0.5)
    saturated = (r12 >= 1.2 and r8 <= 1.0) or (r11 >= 1.5 and r8 >= 1.0)
    gamma = r12 >= 1.0 and r11 >= 1.0 and r8 >= 0.5 and surrounded
    return alpha or beta or saturated or gamma


def _alpha_or_beta(r8: float, r11: float, r12: float) -> bool:
    alpha = r11 != 0 and r8 != 0 and r12 / r11 >= 1.4 and r12 / r8 >= 1.2 and r12 >= 0.15
    beta = r8 != 0 and r11 / r8 >= 2.0 and r11 >= 0.5 and r12 >= 0.5
    return alpha or beta


def oracle_hotmap(r8, r11, r12) -> List[List[bool]]:
    """Pixel-by-pixel hotmap with the 3x3 surrounding check done by explicit loops"""
    rows, cols = len(r8), len(r8[0])
    seeds = [[_alpha_or_beta(float(r8[i][j]), float(r11[i][j]), float(r12[i][j]))
              for j in range(cols)] for i in range(rows)]
    out = []
    for i in range(rows):
        line = []
        for j in range(cols):
            surrounded = False
            for di in (-1, 0, 1):
                for dj in (-1, 0, 1):
                    ni, nj = i + di, j + dj
                    if 0 <= ni < rows and 0 <= nj < cols and seeds[ni][nj]:
                        surrounded = True
            line.append(oracle_hotmap_pixel(float(r8[i][j]), float(r11[i][j]), float(r12[i][j]),
                                            surrounded))
        out.append(line)
    return out


def oracle_chain_sum(coefficients: Dict[Tuple[str, str], Tuple[float, float]],
                     n: str, m: str) -> Tuple[float, float]:
    """Shift of n relative to m in n pixels by walking the adjacent couples one at a time"""
    i_n, i_m = ORDER.index(n), ORDER.index(m)
    r_n = RESOLUTION[n]
    if i_n == i_m:
        return (0.0, 0.0)
    if i_n < i_m:
        along, across = oracle_chain_sum(coefficients, m, n)
        r_m = RESOLUTION[m]
        return (-along * r_m / r_n, -across * r_m / r_n)
    along, across = 0.0, 0.0
    k = i_m
    while k < i_n:
        couple = (ORDER[k], ORDER[k + 1])
        c_along, c_across = coefficients[couple]
        along += c_along * RESOLUTION[ORDER[k]] / r_n
        across += c_across * RESOLUTION[ORDER[k]] / r_n
        k += 1
    return (along, across)


def oracle_components(mask, connectivity: int = 8) -> List[Set[Tuple[int, int]]]:
    """Connected components by iterative flood fill, in raster-scan order of their first pixel"""
    rows, cols = len(mask), len(mask[0])
    if connectivity == 8:
        steps = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]
    else:
        steps = [(-1, 0), (0, -1), (0, 1), (1, 0)]
    seen = [[False] * cols for _ in range(rows)]
    components = []
    for i in range(rows):
        for j in range(cols):
            if not mask[i][j] or seen[i][j]:
                continue
            pixels = set()
            todo = [(i, j)]
            seen[i][j] = True
            while todo:
                r, c = todo.pop()
                pixels.add((r, c))
                for dr, dc in steps:
                    nr, nc = r + dr, c + dc
                    if 0 <= nr < rows and 0 <= nc < cols and mask[nr][nc] and not seen[nr][nc]:
                        seen[nr][nc] = True
                        todo.append((nr, nc))
            components.append(pixels)
    return components


def oracle_boxes(mask, min_cluster: int = 9, connectivity: int = 8) -> List[Tuple[int, int, int, int, int]]:
    """(row0, col0, rows, cols, pixels) of every component with at least min_cluster pixels, sorted"""
    out = []
    for pixels in oracle_components(mask, connectivity):
        if len(pixels) < min_cluster:
            continue
        rs = [p[0] for p in pixels]
        cs = [p[1] for p in pixels]
        out.append((min(rs), min(cs), max(rs) - min(rs) + 1, max(cs) - min(cs) + 1, len(pixels)))
    return sorted(out)


def oracle_patch_origins(height: int, width: int, size: int, stride: int) -> List[Tuple[int, int]]:
    """Enumerate every origin on the stride grid, then add the edge-snapped ones"""
    def axis(length):
        origins = []
        position = 0
        while position + size <= length:
            origins.append(position)
            position += stride
        if length - size not in origins:
            origins.append(length - size)
        return origins
    return [(r, c) for r in axis(height) for c in axis(width)]


def oracle_best_shift(a, b, max_shift: int) -> Tuple[int, int]:
    """Exhaustive search of the integer shift s maximizing the correlation of b against translate(a, s)"""
    rows, cols = len(a), len(a[0])
    best, best_key = None, None
    for dy in range(-max_shift, max_shift + 1):
        for dx in range(-max_shift, max_shift + 1):
            xs, ys = [], []
            for i in range(rows):
                for j in range(cols):
                    si, sj = i - dy, j - dx
                    if 0 <= si < rows and 0 <= sj < cols:
                        xs.append(float(a[si][sj]))
                        ys.append(float(b[i][j]))
            score = _pearson(xs, ys)
            if score is None:
                continue
            key = (-round(score, 9), dy * dy + dx * dx, abs(dx), dy, dx)
            if best_key is None or key < best_key:
                best, best_key = (dy, dx), key
    return best


def _pearson(xs: Sequence[float], ys: Sequence[float]):
    n = len(xs)
    mx = sum(xs) / n
    my = sum(ys) / n
    sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    sxx = sum((x - mx) ** 2 for x in xs)
    syy = sum((y - my) ** 2 for y in ys)
    if sxx == 0 or syy == 0:
        return None
    return sxy / (sxx * syy) ** 0.5
