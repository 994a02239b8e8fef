"""Dataset ingestion: LIBSVM/SVMlight text files and the non-iid node split."""

import numpy as np

from .errors import EmptyDatasetError, ParseError


def load_libsvm(path):
    """Parse a LIBSVM file into dense rows.

    Lines are "label idx:val idx:val ..." with 1-based feature indices.
    Labels {0, +1} are mapped to {-1, +1}.  Returns (rows N-by-d, labels N, d).
    """
    raw_labels = []
    raw_feats = []
    max_idx = 0
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            try:
                label = float(parts[0])
            except ValueError as exc:
                raise ParseError(f"line {lineno}: bad label {parts[0]!r}", line=lineno) from exc
            feats = []
            for tok in parts[1:]:
                idx_s, sep, val_s = tok.partition(":")
                if not sep:
                    raise ParseError(f"line {lineno}: expected idx:val, got {tok!r}", line=lineno)
                try:
                    idx = int(idx_s)
                    val = float(val_s)
                except ValueError as exc:
                    raise ParseError(f"line {lineno}: {exc}", line=lineno) from exc
                if idx < 1:
                    raise ParseError(f"line {lineno}: feature index {idx} < 1", line=lineno)
                feats.append((idx, val))
                max_idx = max(max_idx, idx)
            raw_labels.append(label)
            raw_feats.append(feats)
    if not raw_labels:
        raise EmptyDatasetError(f"no samples in {path}")
    labels = np.array(raw_labels)
    values = set(np.unique(labels))
    if values <= {0.0, 1.0}:
        labels = np.where(labels > 0.5, 1.0, -1.0)
    elif not values <= {-1.0, 1.0}:
        raise ParseError(f"labels must be binary (-1/+1 or 0/1), got {sorted(values)}")
    d = max(max_idx, 1)
    rows = np.zeros((len(raw_labels), d))
    for r, feats in enumerate(raw_feats):
        for idx, val in feats:
            rows[r, idx - 1] = val
    return rows, labels, d


def partition_by_label(rows, labels, n_nodes):
    """Sort samples by label, then cut into contiguous blocks, one per node.

    Block size is floor(N/n); the remainder goes to the last node.  The
    sort is stable so the original order within a label class is kept.
    """
    rows = np.asarray(rows, float)
    labels = np.asarray(labels, float)
    total = rows.shape[0]
    if n_nodes < 1 or total < n_nodes:
        raise EmptyDatasetError(f"cannot split {total} samples across {n_nodes} nodes")
    order = np.argsort(labels, kind="stable")
    rows = rows[order]
    labels = labels[order]
    block = total // n_nodes
    node_rows, node_labels = [], []
    for i in range(n_nodes):
        lo = i * block
        hi = (i + 1) * block if i < n_nodes - 1 else total
        node_rows.append(rows[lo:hi])
        node_labels.append(labels[lo:hi])
    return node_rows, node_labels
