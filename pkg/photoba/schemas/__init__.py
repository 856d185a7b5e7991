"""Schematy Pydantic: konfiguracja przebiegu, sceny, raporty i ciała żądań API."""
