from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware
import os
import sys
from dotenv import load_dotenv

# Add parent directory to sys.path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from utils import VERSION

# Import routers
from api.routers.presets import router as presets_router
from api.routers.experiments import router as experiments_router

# Load environment variables
load_dotenv()

# Create app instance
app = FastAPI(
    title="FSO Backhaul Experiments API",
    description="API for running coverage, rate and diversity experiments on RF/FSO backhaul scenarios",
    version=VERSION
)

# Configure CORS
app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

# Include routers
app.include_router(presets_router)
app.include_router(experiments_router)

# Health check endpoint
@app.get("/health")
async def health_check():
    """Check if the API is running"""
    return {"status": "ok", "message": "API is operational"}

# Root endpoint
@app.get("/")
async def root():
    """Get API information"""
    return {
        "name": "FSO Backhaul Experiments API",
        "version": VERSION,
        "description": "API for running coverage, rate and diversity experiments on RF/FSO backhaul scenarios",
        "endpoints": {
            "presets": "/presets",
            "experiments": "/experiments",
            "health": "/health",
            "docs": "/docs"
        }
    }
