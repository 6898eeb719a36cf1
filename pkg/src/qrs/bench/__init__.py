"""Command-line harness: figure data, Monte-Carlo suites and protocol runs."""
