"""Pure-Python token-move kernel (reference and fallback)."""


def fire_all(tokens, table):
    """Apply every enabled compiled rule to one snapshot's tokens.

    ``tokens`` is a sorted ``(id, count)`` tuple. ``table`` holds
    ``(index, required, forbidden, delta)`` entries as produced by
    ``Rule.compile_simple``. Returns ``[(index, new_tokens), ...]`` in
    table order.
    """
    counts = dict(tokens)
    out = []
    for idx, need, forbidden, delta in table:
        for k, m in need:
            if counts.get(k, 0) < m:
                break
        else:
            for k in forbidden:
                if k in counts:
                    break
            else:
                new = counts.copy()
                for k, d in delta:
                    v = new.get(k, 0) + d
                    if v:
                        new[k] = v
                    else:
                        del new[k]
                out.append((idx, tuple(sorted(new.items()))))
    return out
