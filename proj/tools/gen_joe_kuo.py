#!/usr/bin/env python3
"""Regenerate the Joe-Kuo direction-number file and the embedded C++ table.

The numbers are the new-joe-kuo-6.21201 set as redistributed with SciPy.
Usage: gen_joe_kuo.py <text-out> <header-out> <embedded-dims>
"""
import sys

import numpy as np
import scipy.stats as st
import os


def load():
    z = np.load(os.path.join(os.path.dirname(st.__file__), "_sobol_direction_numbers.npz"))
    rows = []
    # index 0 is the van der Corput dimension; the file format starts at d=2
    for d in range(1, len(z["poly"])):
        p = int(z["poly"][d])
        s = p.bit_length() - 1
        a = (p >> 1) & ((1 << (s - 1)) - 1)
        m = [int(x) for x in z["vinit"][d][:s]]
        rows.append((d + 1, s, a, m))
    return rows


def main():
    text_out, header_out, dims = sys.argv[1], sys.argv[2], int(sys.argv[3])
    rows = load()
    with open(text_out, "w") as f:
        f.write("d       s       a       m_i\n")
        for d, s, a, m in rows:
            f.write(f"{d}\t{s}\t{a}\t" + " ".join(map(str, m)) + " \n")
    flat = []
    for d, s, a, m in rows[: dims - 1]:
        flat.extend([s, a] + m)
    with open(header_out, "w") as f:
        f.write("// Generated by tools/gen_joe_kuo.py. Do not edit.\n")
        f.write("// Joe-Kuo new-joe-kuo-6 direction numbers, dimensions 2..%d.\n" % dims)
        f.write("// Layout per dimension: s, a, m_1..m_s.\n")
        f.write("#pragma once\n\n#include <cstdint>\n\nnamespace hjmsplit::detail {\n\n")
        f.write("inline constexpr int kEmbeddedSobolDims = %d;\n\n" % dims)
        f.write("inline constexpr std::uint32_t kJoeKuoPacked[] = {\n")
        for i in range(0, len(flat), 16):
            f.write("    " + ", ".join(map(str, flat[i : i + 16])) + ",\n")
        f.write("};\n\n}  // namespace hjmsplit::detail\n")


if __name__ == "__main__":
    main()
