"""Generate the bundled LDPC parity-check matrices (alist files).

Deterministic near-regular column-degree-3 constructions at block length
2016 for rates 1/4, 1/3, 1/2 and 2/3. Run from the repository root:

    python tools/make_codes.py
"""

from pathlib import Path

from spofdm.rxchain import LdpcEncoder, make_regular_parity_check, save_alist

RATES = {"1_4": 4, "1_3": 3, "1_2": 2, "2_3": 3}  # label -> denominator
N = 2016

out_dir = Path(__file__).resolve().parent.parent / "src" / "spofdm" / "codes"
out_dir.mkdir(parents=True, exist_ok=True)

for label, den in RATES.items():
    num = int(label.split("_")[0])
    m = N - N * num // den
    code = make_regular_parity_check(N, m, col_degree=3, seed=12345)
    enc = LdpcEncoder(code)
    path = out_dir / f"rate{label}.alist"
    save_alist(code, path)
    print(f"{path.name}: n={code.n} m={code.m} rank={enc.rank} "
          f"k={enc.k} rate={enc.k / code.n:.4f}")
