def f(a):
    for i in a:
        if i:
            while i:
                i -= 1  # dec
    return a
