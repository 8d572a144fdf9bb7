# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled twin of the pure-Python Porter stemmer (see pure.py).

Operates on an ASCII byte buffer with C string primitives; words containing
non-ASCII characters are delegated to the pure backend so both backends agree
on every input.  The parity suite in tests/test_kernels.py holds this module
to byte-for-byte agreement with pure.stem.
"""

from libc.stdlib cimport free, malloc
from libc.string cimport memcmp, memcpy

from .pure import stem as _py_stem


cdef bint _is_cons(const unsigned char* b, Py_ssize_t i):
    cdef unsigned char c = b[i]
    if c == b'a' or c == b'e' or c == b'i' or c == b'o' or c == b'u':
        return False
    if c == b'y':
        if i == 0:
            return True
        return not _is_cons(b, i - 1)
    return True


cdef int _measure(const unsigned char* b, Py_ssize_t end):
    cdef int n = 0
    cdef Py_ssize_t i = 0
    while i < end and _is_cons(b, i):
        i += 1
    while i < end:
        while i < end and not _is_cons(b, i):
            i += 1
        if i >= end:
            break
        n += 1
        while i < end and _is_cons(b, i):
            i += 1
    return n


cdef bint _contains_vowel(const unsigned char* b, Py_ssize_t end):
    cdef Py_ssize_t i
    for i in range(end):
        if not _is_cons(b, i):
            return True
    return False


cdef bint _ends_cvc(const unsigned char* b, Py_ssize_t end):
    if end < 3:
        return False
    if not (_is_cons(b, end - 3) and not _is_cons(b, end - 2)
            and _is_cons(b, end - 1)):
        return False
    cdef unsigned char c = b[end - 1]
    return c != b'w' and c != b'x' and c != b'y'


cdef bint _ends(const unsigned char* b, Py_ssize_t k, const char* suf,
                Py_ssize_t n):
    if n > k:
        return False
    return memcmp(b + k - n, suf, n) == 0


cdef Py_ssize_t _step1a(unsigned char* b, Py_ssize_t k):
    if _ends(b, k, "sses", 4):
        return k - 2
    if _ends(b, k, "ies", 3):
        return k - 2
    if _ends(b, k, "ss", 2):
        return k
    if k >= 1 and b[k - 1] == b's':
        return k - 1
    return k


cdef Py_ssize_t _step1b(unsigned char* b, Py_ssize_t k):
    cdef Py_ssize_t stripped = -1
    cdef unsigned char last
    if _ends(b, k, "eed", 3):
        if _measure(b, k - 3) > 0:
            return k - 1
        return k
    if _ends(b, k, "ed", 2):
        if _contains_vowel(b, k - 2):
            stripped = k - 2
    elif _ends(b, k, "ing", 3):
        if _contains_vowel(b, k - 3):
            stripped = k - 3
    if stripped < 0:
        return k
    k = stripped
    if _ends(b, k, "at", 2) or _ends(b, k, "bl", 2) or _ends(b, k, "iz", 2):
        b[k] = b'e'
        return k + 1
    if k >= 2 and b[k - 1] == b[k - 2] and _is_cons(b, k - 1):
        last = b[k - 1]
        if last != b'l' and last != b's' and last != b'z':
            return k - 1
    if _measure(b, k) == 1 and _ends_cvc(b, k):
        b[k] = b'e'
        return k + 1
    return k


cdef Py_ssize_t _step1c(unsigned char* b, Py_ssize_t k):
    if k >= 1 and b[k - 1] == b'y' and _contains_vowel(b, k - 1):
        b[k - 1] = b'i'
    return k


cdef Py_ssize_t _rule(unsigned char* b, Py_ssize_t k, const char* suf,
                      Py_ssize_t ns, const char* rep, Py_ssize_t nr,
                      int min_m, bint* matched):
    if not _ends(b, k, suf, ns):
        return k
    matched[0] = True
    if _measure(b, k - ns) > min_m:
        if nr > 0:
            memcpy(b + k - ns, rep, nr)
        return k - ns + nr
    return k


cdef Py_ssize_t _step2(unsigned char* b, Py_ssize_t k):
    cdef bint m = False
    k = _rule(b, k, "ational", 7, "ate", 3, 0, &m)
    if m: return k
    k = _rule(b, k, "tional", 6, "tion", 4, 0, &m)
    if m: return k
    k = _rule(b, k, "enci", 4, "ence", 4, 0, &m)
    if m: return k
    k = _rule(b, k, "anci", 4, "ance", 4, 0, &m)
    if m: return k
    k = _rule(b, k, "izer", 4, "ize", 3, 0, &m)
    if m: return k
    k = _rule(b, k, "abli", 4, "able", 4, 0, &m)
    if m: return k
    k = _rule(b, k, "alli", 4, "al", 2, 0, &m)
    if m: return k
    k = _rule(b, k, "entli", 5, "ent", 3, 0, &m)
    if m: return k
    k = _rule(b, k, "eli", 3, "e", 1, 0, &m)
    if m: return k
    k = _rule(b, k, "ousli", 5, "ous", 3, 0, &m)
    if m: return k
    k = _rule(b, k, "ization", 7, "ize", 3, 0, &m)
    if m: return k
    k = _rule(b, k, "ation", 5, "ate", 3, 0, &m)
    if m: return k
    k = _rule(b, k, "ator", 4, "ate", 3, 0, &m)
    if m: return k
    k = _rule(b, k, "alism", 5, "al", 2, 0, &m)
    if m: return k
    k = _rule(b, k, "iveness", 7, "ive", 3, 0, &m)
    if m: return k
    k = _rule(b, k, "fulness", 7, "ful", 3, 0, &m)
    if m: return k
    k = _rule(b, k, "ousness", 7, "ous", 3, 0, &m)
    if m: return k
    k = _rule(b, k, "aliti", 5, "al", 2, 0, &m)
    if m: return k
    k = _rule(b, k, "iviti", 5, "ive", 3, 0, &m)
    if m: return k
    k = _rule(b, k, "biliti", 6, "ble", 3, 0, &m)
    return k


cdef Py_ssize_t _step3(unsigned char* b, Py_ssize_t k):
    cdef bint m = False
    k = _rule(b, k, "icate", 5, "ic", 2, 0, &m)
    if m: return k
    k = _rule(b, k, "ative", 5, "", 0, 0, &m)
    if m: return k
    k = _rule(b, k, "alize", 5, "al", 2, 0, &m)
    if m: return k
    k = _rule(b, k, "iciti", 5, "ic", 2, 0, &m)
    if m: return k
    k = _rule(b, k, "ical", 4, "ic", 2, 0, &m)
    if m: return k
    k = _rule(b, k, "ful", 3, "", 0, 0, &m)
    if m: return k
    k = _rule(b, k, "ness", 4, "", 0, 0, &m)
    return k


cdef Py_ssize_t _step4(unsigned char* b, Py_ssize_t k):
    cdef bint m = False
    k = _rule(b, k, "al", 2, "", 0, 1, &m)
    if m: return k
    k = _rule(b, k, "ance", 4, "", 0, 1, &m)
    if m: return k
    k = _rule(b, k, "ence", 4, "", 0, 1, &m)
    if m: return k
    k = _rule(b, k, "er", 2, "", 0, 1, &m)
    if m: return k
    k = _rule(b, k, "ic", 2, "", 0, 1, &m)
    if m: return k
    k = _rule(b, k, "able", 4, "", 0, 1, &m)
    if m: return k
    k = _rule(b, k, "ible", 4, "", 0, 1, &m)
    if m: return k
    k = _rule(b, k, "ant", 3, "", 0, 1, &m)
    if m: return k
    k = _rule(b, k, "ement", 5, "", 0, 1, &m)
    if m: return k
    k = _rule(b, k, "ment", 4, "", 0, 1, &m)
    if m: return k
    k = _rule(b, k, "ent", 3, "", 0, 1, &m)
    if m: return k
    if _ends(b, k, "ion", 3):
        if k - 3 >= 1 and (b[k - 4] == b's' or b[k - 4] == b't') \
                and _measure(b, k - 3) > 1:
            return k - 3
        return k
    k = _rule(b, k, "ou", 2, "", 0, 1, &m)
    if m: return k
    k = _rule(b, k, "ism", 3, "", 0, 1, &m)
    if m: return k
    k = _rule(b, k, "ate", 3, "", 0, 1, &m)
    if m: return k
    k = _rule(b, k, "iti", 3, "", 0, 1, &m)
    if m: return k
    k = _rule(b, k, "ous", 3, "", 0, 1, &m)
    if m: return k
    k = _rule(b, k, "ive", 3, "", 0, 1, &m)
    if m: return k
    k = _rule(b, k, "ize", 3, "", 0, 1, &m)
    return k


cdef Py_ssize_t _step5a(unsigned char* b, Py_ssize_t k):
    cdef int m
    if k >= 1 and b[k - 1] == b'e':
        m = _measure(b, k - 1)
        if m > 1:
            return k - 1
        if m == 1 and not _ends_cvc(b, k - 1):
            return k - 1
    return k


cdef Py_ssize_t _step5b(unsigned char* b, Py_ssize_t k):
    if k >= 2 and b[k - 1] == b'l' and b[k - 2] == b'l' \
            and _measure(b, k - 1) > 1:
        return k - 1
    return k


cpdef str stem(str word):
    """Stem a single lowercase word with the Porter algorithm."""
    cdef Py_ssize_t n = len(word)
    if n <= 2:
        return word
    cdef bytes enc
    try:
        enc = word.encode("ascii")
    except UnicodeEncodeError:
        return _py_stem(word)
    cdef unsigned char stack_buf[64]
    cdef unsigned char* b = stack_buf
    cdef bint heap = False
    if n + 2 > 64:
        b = <unsigned char*> malloc(n + 2)
        if b == NULL:
            raise MemoryError()
        heap = True
    memcpy(b, <const unsigned char*> <const char*> enc, n)
    cdef Py_ssize_t k = n
    try:
        k = _step1a(b, k)
        k = _step1b(b, k)
        k = _step1c(b, k)
        k = _step2(b, k)
        k = _step3(b, k)
        k = _step4(b, k)
        k = _step5a(b, k)
        k = _step5b(b, k)
        return (<bytes> b[:k]).decode("ascii")
    finally:
        if heap:
            free(b)


cpdef list stem_words(list words):
    """Stem a sequence of lowercase words; the batch entry point kernels use."""
    cdef list out = []
    for w in words:
        out.append(stem(w))
    return out
