"""Words over a symmetric alphabet.

Letters are strings; the formal inverse of ``"x"`` is ``"x^-1"`` and vice
versa.  A word is a tuple of letters and is written as space separated
labels in files and on the command line.
"""

INVERSE_SUFFIX = "^-1"


def inverse_letter(letter):
    if letter.endswith(INVERSE_SUFFIX):
        return letter[: -len(INVERSE_SUFFIX)]
    return letter + INVERSE_SUFFIX


def base_letter(letter):
    """Return ``(generator, sign)`` for a letter."""
    if letter.endswith(INVERSE_SUFFIX):
        return letter[: -len(INVERSE_SUFFIX)], -1
    return letter, 1


def inverse_word(word):
    return tuple(inverse_letter(x) for x in reversed(word))


def parse_word(text):
    """Parse ``"a b a^-1"`` into a tuple.

    The empty string, ``"1"`` and ``"e"`` denote the identity.
    """
    text = text.strip()
    if text in ("", "1", "e"):
        return ()
    return tuple(text.split())


def format_word(word):
    return " ".join(word) if word else "1"


def free_reduce(word):
    out = []
    for letter in word:
        if out and out[-1] == inverse_letter(letter):
            out.pop()
        else:
            out.append(letter)
    return tuple(out)


def cyclic_reduce(word):
    """Cyclically reduce a word in the free group on its letters."""
    w = free_reduce(word)
    i, j = 0, len(w) - 1
    while i < j and w[i] == inverse_letter(w[j]):
        i += 1
        j -= 1
    return w[i:j + 1]


def is_freely_reduced(word):
    return all(word[k + 1] != inverse_letter(word[k]) for k in range(len(word) - 1))


def power(word, n):
    if n >= 0:
        return tuple(word) * n
    return inverse_word(word) * (-n)


def random_reduced_word(rng, gens, n):
    """Uniform freely reduced word of length ``n`` over ``gens`` and inverses."""
    letters = [x for g in gens for x in (g, inverse_letter(g))]
    w = []
    while len(w) < n:
        x = letters[int(rng.integers(len(letters)))]
        if w and w[-1] == inverse_letter(x):
            continue
        w.append(x)
    return tuple(w)
