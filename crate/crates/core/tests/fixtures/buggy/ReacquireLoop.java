package org.example.sip;

import android.content.BroadcastReceiver;
import android.content.Context;
import android.content.Intent;
import android.os.PowerManager;

public class ReacquireLoop extends BroadcastReceiver {
    private PowerManager.WakeLock wakeLock;

    @Override
    public void onReceive(Context context, Intent intent) {
        while (pending(intent)) {
            wakeLock.acquire(); // LEAK: reacquire_counted
            dispatch(intent);
        }
    }
}
