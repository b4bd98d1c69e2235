# API Routers package 