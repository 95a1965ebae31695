"""Fixed-format MPS export and the matching reader.

Fields start at the classic columns 2, 5, 15, 25, 40 and 50.  Numbers are
written with ``repr`` so a read-back reproduces every coefficient exactly; a
number longer than its 12-character field simply runs on, and the reader
therefore splits on whitespace rather than on column positions.

Names that do not fit the 8-character fields (or contain blanks, or clash)
are replaced by ``C0000001``-style codes for columns and ``R0000001``-style
codes for rows.  The originals are listed in ``* NAMEMAP`` comment lines
right after the NAME card.
"""

from __future__ import annotations

import io
import re

from .program import BINARY, CONTINUOUS, EQ, GE, LE, MathProgram

OBJ_ROW = "OBJ"
MARKER = "'MARKER'"
NAME_WIDTH = 8
_SENSE_CODE = {LE: "L", GE: "G", EQ: "E"}
_CODE_SENSE = {v: k for k, v in _SENSE_CODE.items()}
_CODE_RE = re.compile(r"^[CR]\d{7}$")


class MpsError(ValueError):
    pass


def _num(v: float) -> str:
    return repr(float(v))


def _card(f1: str = "", f2: str = "", f3: str = "", f4: str = "", f5: str = "", f6: str = "") -> str:
    line = f" {f1:<2} {f2:<8}  {f3:<8}  {f4:<12}"
    if f5 or f6:
        line += f"   {f5:<8}  {f6}"
    return line.rstrip()


def _short_names(names, prefix: str, reserved=()):
    """Deterministic field-safe names; returns (short names, mangled pairs)."""
    seen = set(reserved)
    out, mangled = [], []
    for k, name in enumerate(names):
        ok = (0 < len(name) <= NAME_WIDTH and not any(ch.isspace() for ch in name)
              and not _CODE_RE.match(name) and name not in seen)
        short = name if ok else f"{prefix}{k + 1:07d}"
        if not ok:
            mangled.append((short, name))
        seen.add(short)
        out.append(short)
    return out, mangled


def export_mps(prog: MathProgram) -> str:
    cols, col_map = _short_names(prog.var_names, "C")
    rows, row_map = _short_names([c.name for c in prog.constraints], "R", reserved={OBJ_ROW, MARKER})

    out = io.StringIO()

    def w(line: str) -> None:
        out.write(line + "\n")

    w(f"NAME          {prog.name}")
    for short, name in col_map + row_map:
        w(f"* NAMEMAP {short} {name}")

    w("ROWS")
    w(_card("N", OBJ_ROW))
    for short, con in zip(rows, prog.constraints):
        w(_card(_SENSE_CODE[con.sense], short))

    # column-major view of the rows, kept in row order
    entries: list[list[tuple[int, float]]] = [[] for _ in range(prog.num_vars)]
    for i, con in enumerate(prog.constraints):
        for j, a in con.coefs.items():
            entries[j].append((i, a))

    w("COLUMNS")
    in_int = False
    markers = 0
    for j, name in enumerate(cols):
        is_bin = prog.kinds[j] == BINARY
        if is_bin != in_int:
            markers += 1
            tag = "'INTORG'" if is_bin else "'INTEND'"
            w(_card("", f"MARKER{markers:02d}", MARKER, "", tag))
            in_int = is_bin
        cells = []
        if j in prog.objective:
            cells.append((OBJ_ROW, prog.objective[j]))
        cells.extend((rows[i], a) for i, a in sorted(entries[j]))
        if not cells:
            cells.append((OBJ_ROW, 0.0))  # keeps the column in the file
        for row, a in cells:
            w(_card("", name, row, _num(a)))
    if in_int:
        markers += 1
        w(_card("", f"MARKER{markers:02d}", MARKER, "", "'INTEND'"))

    w("RHS")
    for short, con in zip(rows, prog.constraints):
        if con.rhs != 0.0:
            w(_card("", "RHS", short, _num(con.rhs)))

    w("BOUNDS")
    for j, name in enumerate(cols):
        lo, hi = prog.lb[j], prog.ub[j]
        if prog.kinds[j] == BINARY and lo == 0.0 and hi == 1.0:
            w(_card("BV", "BND", name))
        elif lo == hi:
            w(_card("FX", "BND", name, _num(lo)))
        else:
            w(_card("LO", "BND", name, _num(lo)))
            w(_card("UP", "BND", name, _num(hi)))
    w("ENDATA")
    return out.getvalue()


def write_mps(prog: MathProgram, path) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(export_mps(prog))


def parse_mps(text: str) -> MathProgram:
    """Read a file produced by :func:`export_mps` back into a program."""
    names: dict[str, str] = {}
    section = None
    prog = MathProgram()
    row_index: dict[str, int] = {}
    row_defs: list[tuple[str, str]] = []
    rhs: dict[str, float] = {}
    col_index: dict[str, int] = {}
    coefs: list[dict[int, float]] = []
    objective: dict[int, float] = {}
    kinds: list[str] = []
    bounds: dict[str, list] = {}
    in_int = False
    obj_name = None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        if raw.startswith("*"):
            parts = raw.split(None, 3)
            if len(parts) == 4 and parts[1] == "NAMEMAP":
                names[parts[2]] = parts[3]
            continue
        if not raw[0].isspace():
            head = raw.split(None, 1)
            section = head[0]
            if section == "NAME":
                prog.name = head[1].strip() if len(head) > 1 else ""
            elif section == "ENDATA":
                break
            elif section not in ("ROWS", "COLUMNS", "RHS", "BOUNDS", "RANGES"):
                raise MpsError(f"line {lineno}: unknown section {section!r}")
            continue
        f = raw.split()
        if section == "ROWS":
            code, name = f
            if code == "N":
                if obj_name is None:
                    obj_name = name
                continue
            if code not in _CODE_SENSE:
                raise MpsError(f"line {lineno}: bad row type {code!r}")
            row_index[name] = len(row_defs)
            row_defs.append((name, _CODE_SENSE[code]))
            coefs.append({})
        elif section == "COLUMNS":
            if len(f) >= 3 and f[1] == MARKER:
                in_int = f[2] == "'INTORG'"
                continue
            col, pairs = f[0], f[1:]
            if col not in col_index:
                col_index[col] = len(kinds)
                kinds.append(BINARY if in_int else CONTINUOUS)
            j = col_index[col]
            for k in range(0, len(pairs), 2):
                row, val = pairs[k], float(pairs[k + 1])
                if row == obj_name:
                    if val != 0.0:
                        objective[j] = val
                elif row in row_index:
                    coefs[row_index[row]][j] = val
                else:
                    raise MpsError(f"line {lineno}: unknown row {row!r}")
        elif section == "RHS":
            pairs = f[1:]
            for k in range(0, len(pairs), 2):
                rhs[pairs[k]] = float(pairs[k + 1])
        elif section == "BOUNDS":
            kind, col = f[0], f[2]
            val = float(f[3]) if len(f) > 3 else None
            b = bounds.setdefault(col, [0.0, None])
            if kind == "BV":
                b[0], b[1] = 0.0, 1.0
            elif kind == "FX":
                b[0] = b[1] = val
            elif kind == "LO":
                b[0] = val
            elif kind == "UP":
                b[1] = val
            else:
                raise MpsError(f"line {lineno}: unsupported bound type {kind!r}")
        elif section == "RANGES":
            raise MpsError("RANGES are not supported")

    for col, j in col_index.items():
        lo, hi = bounds.get(col, [0.0, None])
        if hi is None:
            raise MpsError(f"column {col} has no upper bound")
        k = prog.add_var(names.get(col, col), lo, hi, kinds[j])
        prog.lb[k], prog.ub[k] = float(lo), float(hi)
    for (name, sense), row in zip(row_defs, coefs):
        prog.add_constraint(row, sense, rhs.get(name, 0.0), names.get(name, name))
    prog.set_objective(objective)
    return prog


def programs_equal(a: MathProgram, b: MathProgram) -> bool:
    """Coefficient-for-coefficient equality, names and kinds included."""
    if (a.var_names, a.kinds) != (b.var_names, b.kinds):
        return False
    if list(map(float, a.lb)) != list(map(float, b.lb)) or list(map(float, a.ub)) != list(map(float, b.ub)):
        return False
    if a.objective != b.objective or a.num_constraints != b.num_constraints:
        return False
    return all(
        (x.coefs, x.sense, x.rhs, x.name) == (y.coefs, y.sense, y.rhs, y.name)
        for x, y in zip(a.constraints, b.constraints)
    )
