def repeat_join(parts, sep):
    out = ""
    for p in parts:
        out = out + p + sep
    return out
