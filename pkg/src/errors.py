class TrailForgeError(Exception):
    '''
    Base class for every error raised by TrailForge
    '''


class IngestError(TrailForgeError):

    def __init__(self, path, line_number: int, reason: str):
        self.path = str(path)
        self.line_number = line_number
        self.reason = reason

        super().__init__(f"{self.path}:{line_number}: {reason}")


class WorldError(TrailForgeError):
    pass


class NoPathError(TrailForgeError):

    def __init__(self, message: str, pair_index: int = None):
        self.pair_index = pair_index

        super().__init__(message)


class DegenerateError(TrailForgeError):
    pass


class GenerationError(TrailForgeError):
    pass


class BudgetExhaustedError(GenerationError):
    '''
    The search stopped before covering the target distance. Carries the deepest
    path found so far and the search statistics
    '''

    def __init__(self, message: str, partial_path, stats):
        self.partial_path = partial_path
        self.stats = stats

        super().__init__(message)


class CorpusError(TrailForgeError):
    pass


class ConfigError(TrailForgeError):
    pass
