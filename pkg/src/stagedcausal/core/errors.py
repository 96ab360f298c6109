class StagedCausalError(Exception):
    """Base class for errors caused by user input (bad data, models or options).

    The CLI maps these to exit code 1; anything else is an internal error.
    """

    pass
