import os
import sys
import uvicorn
from dotenv import load_dotenv

# Add the current directory to the Python path
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

# Load environment variables
load_dotenv()


def start_api():
    """Start the FastAPI application with uvicorn server"""
    uvicorn.run(
        "api.main:app",
        host=os.getenv("API_HOST", "0.0.0.0"),
        port=int(os.getenv("API_PORT", "8000")),
        reload=os.getenv("API_RELOAD", "False").lower() == "true"
    )


if __name__ == "__main__":
    start_api()
