class PmlabError(Exception):
    pass


class GenerationFailure(PmlabError):
    """Raised when a generator exhausts its attempts without passing its checks."""

    def __init__(self, check, attempts, detail=""):
        self.check = check
        self.attempts = attempts
        self.detail = detail
        msg = f"generation failed after {attempts} attempt(s): check {check!r} did not pass"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class FamilyTooLarge(PmlabError):
    def __init__(self, size, limit):
        self.size = size
        self.limit = limit
        super().__init__(f"family of size {size} exceeds exhaustive limit {limit}; subsample explicitly")


class MalformedTrace(PmlabError):
    def __init__(self, index, node, reason="not reachable from the visited prefix"):
        self.index = index
        self.node = node
        self.reason = reason
        super().__init__(f"trace step {index} (node {node}): {reason}")


class CrossCheckMismatch(PmlabError):
    def __init__(self, query):
        self.query = query
        super().__init__(f"structure answer differs from brute force on query {query}")


class SearchCapExceeded(PmlabError):
    pass


class MemoryBudgetExceeded(PmlabError):
    pass


class FormatError(PmlabError):
    pass
