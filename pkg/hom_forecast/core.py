import logging

APPLICATION_ID = "org.homforecast.hom_forecast"

LOGGER = logging.getLogger(APPLICATION_ID.split(".")[-1])
