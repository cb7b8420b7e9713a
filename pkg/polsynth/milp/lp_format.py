"""CPLEX LP text export, for cross-checking models with external MILP solvers."""
import math

from .model import EQ, MAXIMIZE, MilpModel

_TERMS_PER_LINE = 8


def _number(value: float) -> str:
    return f"{value:.17g}"


def _expression(terms, names) -> list:
    """Linear expression split into continuation lines of bounded length."""
    pieces = []
    for k, (index, coef) in enumerate(terms):
        sign = "-" if coef < 0 else "+"
        magnitude = abs(coef)
        body = names[index] if magnitude == 1.0 else f"{_number(magnitude)} {names[index]}"
        if k == 0:
            pieces.append(f"- {body}" if sign == "-" else body)
        else:
            pieces.append(f"{sign} {body}")
    if not pieces:
        pieces = [f"0 {names[0]}"] if names else ["0"]
    return [" ".join(pieces[i:i + _TERMS_PER_LINE]) for i in range(0, len(pieces), _TERMS_PER_LINE)]


def write_lp(model: MilpModel) -> str:
    names = model.export_names()
    lines = [f"\\ Problem: {model.name}"]
    if model.objective_constant:
        lines.append(f"\\ objective constant {_number(model.objective_constant)} omitted")

    lines.append("Maximize" if model.sense == MAXIMIZE else "Minimize")
    body = _expression(sorted(model.objective.items()), names)
    lines.append(f" obj: {body[0]}")
    lines.extend(f"    {more}" for more in body[1:])

    lines.append("Subject To")
    for k, row in enumerate(model.constraints):
        relation = "=" if row.sense == EQ else row.sense
        body = _expression(row.terms, names)
        body[-1] = f"{body[-1]} {relation} {_number(row.rhs)}"
        lines.append(f" r{k}: {body[0]}")
        lines.extend(f"    {more}" for more in body[1:])

    lines.append("Bounds")
    for v in model.variables:
        if v.is_binary:
            continue
        name = names[v.index]
        if math.isinf(v.lb) and math.isinf(v.ub):
            lines.append(f" {name} free")
        elif v.lb == v.ub:
            lines.append(f" {name} = {_number(v.lb)}")
        else:
            lower = "-inf" if math.isinf(v.lb) else _number(v.lb)
            upper = "+inf" if math.isinf(v.ub) else _number(v.ub)
            lines.append(f" {lower} <= {name} <= {upper}")

    binaries = [names[index] for index in model.binary_indices()]
    if binaries:
        lines.append("Binaries")
        for i in range(0, len(binaries), _TERMS_PER_LINE):
            lines.append(" " + " ".join(binaries[i:i + _TERMS_PER_LINE]))
    lines.append("End")
    return "\n".join(lines) + "\n"
