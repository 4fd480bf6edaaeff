"""
Tests for Audio Features

This package contains unit tests, integration tests and acceptance suites for:
- Audio decoding, framing and windows
- Spectral, prosodic and clinical feature extractors
- Statistics, components and YAML configuration
- The batch pipeline, CSV output and series storage
- Rank correlation, reference checks, CLI and MCP server
"""
