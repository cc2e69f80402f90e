class Processor:
    """Backend behind the tool server."""

    def describe(self):
        raise NotImplementedError

    def self_test(self):
        raise NotImplementedError
