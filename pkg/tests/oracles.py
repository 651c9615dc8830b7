"""Slow, obviously-correct helpers shared by the tests."""


def brute_span(tile, layer):
    """Min/max input row and column over every (output, tap) pair of the tile."""
    def axis(origin, count, n_in):
        hits = [(o + layer.p - k) // layer.s
                for o in range(origin, origin + count) for k in range(layer.k)
                if (o + layer.p - k) % layer.s == 0 and 0 <= (o + layer.p - k) // layer.s < n_in]
        return (min(hits), max(hits)) if hits else None
    h = axis(tile.origin_h, tile.out_rows, layer.in_h)
    w = axis(tile.origin_w, tile.out_cols, layer.in_w)
    return None if h is None or w is None else (h, w)
